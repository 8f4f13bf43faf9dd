use std::fmt::Write as _;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context};
use clap::{Args, Parser, Subcommand};

use gkdv_core::experiment::{
    parse_lambda_grid, reverse, roots_csv, roots_table, selftest, simulate, sweep, RunManifest, SelftestOptions,
};
use gkdv_core::modulation::{measure_defect, Ansatz, Tracker};
use gkdv_core::spectral::{load_snapshot, write_atomic, FieldState};

#[derive(Parser)]
#[command(name = "gkdv", version, about = "Soliton scattering off a slowly varying potential")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Threshold and limiting-scaling table over a lambda grid.
    Roots {
        #[arg(long, default_value_t = 2)]
        m: u32,
        /// `a:b:n` or a comma list.
        #[arg(long, default_value = "0.05:0.95:19")]
        lambdas: String,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// One scattering run.
    Simulate {
        #[command(flatten)]
        run: RunArgs,
    },
    /// Runs of the same scenario over several eps, with exponent fits.
    Sweep {
        #[command(flatten)]
        run: RunArgs,
        #[arg(long, value_delimiter = ',', default_value = "0.2,0.14,0.1,0.07,0.05")]
        eps_list: Vec<f64>,
        #[arg(long, default_value_t = default_jobs())]
        jobs: usize,
        /// Skip the constant-potential control run.
        #[arg(long)]
        no_control: bool,
    },
    /// Forward run, then the reflected run back to the start with the mirrored potential.
    Reverse {
        #[command(flatten)]
        run: RunArgs,
    },
    /// Modulation parameters of a directory of snapshots.
    Track {
        #[command(flatten)]
        snaps: SnapshotArgs,
    },
    /// Terminal defect over the snapshots inside a time window.
    Defect {
        #[command(flatten)]
        snaps: SnapshotArgs,
        /// `t0:t1`
        #[arg(long)]
        window: String,
        /// Expected limiting scaling, reported next to the measured one.
        #[arg(long)]
        c_inf: Option<f64>,
    },
    /// Small-size invariant checks over every module.
    Selftest {
        /// Snapshot that must load.
        #[arg(long)]
        fixture: Option<PathBuf>,
        #[arg(long, hide = true)]
        xi_scale: Option<f64>,
    },
}

#[derive(Args)]
struct RunArgs {
    /// Manifest file; without it the scenario is built from --m, --lambda and --eps.
    #[arg(long)]
    manifest: Option<PathBuf>,
    #[arg(long, default_value_t = 2)]
    m: u32,
    #[arg(long, default_value_t = 0.3)]
    lambda: f64,
    #[arg(long, default_value_t = 0.1)]
    eps: f64,
    /// `key=value` overrides applied after the manifest.
    #[arg(long = "set", value_name = "KEY=VALUE")]
    overrides: Vec<String>,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct SnapshotArgs {
    /// Directory holding `snap_*.bin` files.
    #[arg(long)]
    snapshots: PathBuf,
    /// Manifest of the run that wrote the snapshots.
    #[arg(long)]
    manifest: PathBuf,
    #[arg(long)]
    out: Option<PathBuf>,
}

fn default_jobs() -> usize {
    std::thread::available_parallelism().map(|n| n.get()).unwrap_or(1)
}

impl RunArgs {
    fn manifest(&self) -> anyhow::Result<RunManifest> {
        let mut man = match &self.manifest {
            Some(p) => RunManifest::load(p)?,
            None => RunManifest::scenario(self.m, self.lambda, self.eps)?,
        };
        man.apply_overrides(&self.overrides)?;
        man.validate()?;
        Ok(man)
    }
}

fn load_series(dir: &Path) -> anyhow::Result<Vec<FieldState>> {
    let mut files: Vec<PathBuf> = std::fs::read_dir(dir)
        .with_context(|| format!("reading {}", dir.display()))?
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| {
            p.file_name()
                .and_then(|n| n.to_str())
                .map(|n| n.starts_with("snap_") && n.ends_with(".bin"))
                .unwrap_or(false)
        })
        .collect();
    files.sort();
    if files.is_empty() {
        bail!(gkdv_core::Error::Manifest(format!("no snapshots in {}", dir.display())));
    }
    let mut states = Vec::with_capacity(files.len());
    for f in files {
        states.push(load_snapshot(&f)?.state);
    }
    states.sort_by(|a, b| a.t.total_cmp(&b.t));
    Ok(states)
}

fn track_states(man: &RunManifest, states: &[FieldState]) -> anyhow::Result<Vec<(FieldState, f64, f64)>> {
    let first = &states[0];
    // start from the tallest sample
    let (jmax, _) = first
        .values
        .iter()
        .enumerate()
        .fold((0, f64::MIN), |acc, (j, &v)| if v > acc.1 { (j, v) } else { acc });
    let rho0 = first.grid.x(jmax);
    let mut tracker = Tracker::new(
        Ansatz::new(man.exponent()?, man.eps, man.potential()?),
        man.lambda,
        1.0,
        rho0,
        first.t,
    )
    .with_weight_scale(man.virial_scale);
    let mut out = Vec::with_capacity(states.len());
    for s in states {
        let (sample, _) = tracker.push(s)?;
        out.push((s.clone(), sample.c, sample.rho));
    }
    Ok(out)
}

fn emit(out: Option<&Path>, text: &str) -> anyhow::Result<()> {
    match out {
        Some(p) => write_atomic(p, text.as_bytes())?,
        None => print!("{text}"),
    }
    Ok(())
}

fn run(cli: Cli) -> anyhow::Result<bool> {
    match cli.command {
        Command::Roots { m, lambdas, out } => {
            let grid = parse_lambda_grid(&lambdas)?;
            let rows = roots_table(m, &grid)?;
            emit(out.as_deref(), &roots_csv(m, &rows))?;
            Ok(true)
        }
        Command::Simulate { run } => {
            let man = run.manifest()?;
            let out = simulate(&man, Some(&run.out))?;
            print!("{}", out.summary_text());
            Ok(true)
        }
        Command::Sweep {
            run,
            eps_list,
            jobs,
            no_control,
        } => {
            let man = run.manifest()?;
            let res = sweep(&man, &eps_list, jobs, !no_control, Some(&run.out))?;
            print!("{}", res.fits_text(&man.hash()));
            Ok(res.rows.iter().all(|r| r.error.is_none()))
        }
        Command::Reverse { run } => {
            let man = run.manifest()?;
            let res = reverse(&man, Some(&run.out))?;
            print!("{}", res.summary_text());
            Ok(true)
        }
        Command::Track { snaps } => {
            let man = RunManifest::load(&snaps.manifest)?;
            let states = load_series(&snaps.snapshots)?;
            let tracked = track_states(&man, &states)?;
            let mut s = format!("# manifest={}\nt,c,rho\n", man.hash());
            for (u, c, rho) in &tracked {
                let _ = writeln!(s, "{:.10e},{:.16e},{:.16e}", u.t, c, rho);
            }
            emit(snaps.out.as_deref(), &s)?;
            Ok(true)
        }
        Command::Defect { snaps, window, c_inf } => {
            let man = RunManifest::load(&snaps.manifest)?;
            let (a, b) = window
                .split_once(':')
                .and_then(|(a, b)| Some((a.trim().parse::<f64>().ok()?, b.trim().parse::<f64>().ok()?)))
                .ok_or_else(|| gkdv_core::Error::Manifest(format!("cannot parse window '{window}'")))?;
            let states: Vec<FieldState> = load_series(&snaps.snapshots)?
                .into_iter()
                .filter(|s| s.t >= a - 1e-9 && s.t <= b + 1e-9)
                .collect();
            if states.is_empty() {
                bail!(gkdv_core::Error::WindowTooShort {
                    length: 0.0,
                    required: b - a
                });
            }
            let tracked = track_states(&man, &states)?;
            let m = man.exponent()?;
            let mut rhos: Vec<f64> = tracked.iter().map(|t| t.2).collect();
            rhos.sort_by(|x, y| x.total_cmp(y));
            let kappa = man
                .potential()?
                .a(man.eps * rhos[rhos.len() / 2])
                .powf(-1.0 / (m.as_f64() - 1.0));
            let report = measure_defect(&tracked, m, kappa, c_inf, 0.0)?;
            let mut buf = format!("# manifest={}\n", man.hash()).into_bytes();
            report.write_csv(&mut buf)?;
            emit(snaps.out.as_deref(), &String::from_utf8(buf)?)?;
            Ok(true)
        }
        Command::Selftest { fixture, xi_scale } => {
            let report = selftest(&SelftestOptions { xi_scale, fixture });
            println!("{report}");
            Ok(report.passed())
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(1),
        Err(e) => {
            eprintln!("error: {e:#}");
            let input = match e.downcast_ref::<gkdv_core::Error>() {
                Some(core) => core.is_input_error(),
                None => e.downcast_ref::<std::io::Error>().is_none(),
            };
            ExitCode::from(if input { 2 } else { 1 })
        }
    }
}
