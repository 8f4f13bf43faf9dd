//! Scenario runs: PDE stepping with tracking, conservation checks, monitoring
//! functionals and the terminal defect, plus the reflect-and-reverse run.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};
use std::time::Instant;

use crate::correction::{cutoff, solve_ac, CorrectionParams, CorrectionProfile};
use crate::diagnostics::{
    localized_h1_mass, modified_mass_hat, virial_functional, DiagnosticParams, FunctionalSeries, VirialWeight,
};
use crate::effective::{solve_c_infinity, EffectiveTrajectory};
use crate::error::{Error, Result};
use crate::fit::linear_fit;
use crate::modulation::{edge_amplitude, measure_defect, Ansatz, DefectReport, ModulationTrack, Tracker};
use crate::potential::Profile;
use crate::soliton::ScaledSoliton;
use crate::spectral::{
    energy_with, h1_norm, mass_and_flux, save_snapshot, write_atomic, FieldState, Snapshot, Stepper,
};

use super::manifest::{RunManifest, RunPlan};

/// One row of `series.csv`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SeriesRow {
    pub t: f64,
    pub mass: f64,
    pub energy: f64,
    pub h1_defect: f64,
    pub c: f64,
    pub rho: f64,
}

#[derive(Clone, Debug)]
pub struct RunOutput {
    pub manifest: RunManifest,
    pub hash: String,
    pub plan: Option<RunPlan>,
    pub rows: Vec<SeriesRow>,
    pub track: ModulationTrack,
    pub defect: Option<DefectReport>,
    /// `|M(T) - M(t0) - int flux| / M(t0)`.
    pub mass_residual: f64,
    pub mass_change: f64,
    /// `max |E_a(t) - E_a(t0)| / |E_a(t0)|`.
    pub energy_drift: f64,
    pub mass_hat: FunctionalSeries,
    pub virial: FunctionalSeries,
    /// `int (z_x^2 + z^2) e^{-|x - rho|/A}` per sample, with `z` measured against the
    /// corrected ansatz (the bare soliton on flat ground).
    pub local_mass: FunctionalSeries,
    /// Time integral of `local_mass` over `(-T_eps, T~_eps)`, or the whole run
    /// without a ramp.
    pub local_mass_integral: f64,
    /// Largest edge amplitude inside the window, and the first window time it
    /// exceeded the re-entry threshold.
    pub edge_max: f64,
    pub reentry: Option<f64>,
    pub initial: FieldState,
    pub final_state: FieldState,
    pub snapshots: Vec<PathBuf>,
    pub steps: u64,
    pub elapsed: f64,
}

impl RunOutput {
    pub fn ode(&self) -> Option<&EffectiveTrajectory> {
        self.plan.as_ref().and_then(|p| p.ode.as_ref())
    }

    /// Relative maximal rise of `M_hat` along the run.
    pub fn mass_hat_rise(&self) -> f64 {
        let m0 = self.mass_hat.samples().first().map(|s| s.1).unwrap_or(1.0);
        self.mass_hat.max_rise() / m0
    }

    /// `rho(T) - rho(t0) - int (c - lambda) dt` and its first-order prediction
    /// `eps int f2(c, rho) dt`.
    pub fn position_drift(&self) -> Result<Drift> {
        let man = &self.manifest;
        let params = CorrectionParams::new(man.exponent()?, man.lambda, man.eps, man.potential()?);
        let s = &self.track.samples;
        let mut transport = 0.0;
        let mut predicted = 0.0;
        for w in s.windows(2) {
            let dt = w[1].t - w[0].t;
            transport += 0.5 * dt * (w[0].c + w[1].c - 2.0 * man.lambda);
            predicted += 0.5
                * dt
                * man.eps
                * (params.f2_closed_form(w[0].c, w[0].rho) + params.f2_closed_form(w[1].c, w[1].rho));
        }
        let (first, last) = (s.first().expect("track"), s.last().expect("track"));
        Ok(Drift {
            measured: last.rho - first.rho - transport,
            predicted,
        })
    }

    /// Least-squares `rho'` over the terminal window.
    pub fn window_speed(&self) -> Option<f64> {
        let d = self.defect.as_ref()?;
        let pts: Vec<(f64, f64)> = d.samples.iter().map(|s| (s.0, s.3)).collect();
        (pts.len() >= 2).then(|| linear_fit(&pts).slope)
    }

    pub fn summary_text(&self) -> String {
        let mut s = String::new();
        let _ = writeln!(s, "# manifest={}", self.hash);
        let kv = |s: &mut String, k: &str, v: String| {
            let _ = writeln!(s, "{k} = {v}");
        };
        if let Some(ode) = self.ode() {
            kv(&mut s, "branch", ode.branch.to_string());
            kv(&mut s, "escape_time", ode.escape_time.to_string());
            kv(&mut s, "ode_terminal_c", ode.last().c.to_string());
        }
        if let Some(d) = &self.defect {
            kv(&mut s, "c_plus", d.c_plus.to_string());
            kv(&mut s, "kappa", d.kappa.to_string());
            kv(&mut s, "defect_liminf", d.liminf_estimate.to_string());
            if let Some(c) = d.c_inf {
                kv(&mut s, "c_inf", c.to_string());
            }
            if let Some(g) = d.c_plus_gap() {
                kv(&mut s, "c_plus_gap", g.to_string());
            }
        }
        if let Some(v) = self.window_speed() {
            kv(&mut s, "window_speed", v.to_string());
        }
        kv(&mut s, "energy_drift", self.energy_drift.to_string());
        kv(&mut s, "mass_residual", self.mass_residual.to_string());
        kv(&mut s, "mass_hat_rise", self.mass_hat_rise().to_string());
        kv(&mut s, "local_mass_integral", self.local_mass_integral.to_string());
        kv(&mut s, "edge_max", self.edge_max.to_string());
        kv(
            &mut s,
            "reentry",
            self.reentry.map(|t| t.to_string()).unwrap_or_else(|| "none".into()),
        );
        kv(&mut s, "steps", self.steps.to_string());
        s
    }

    pub fn series_csv(&self) -> String {
        let mut s = format!("# manifest={}\nt,M,Ea,H1defect,c,rho\n", self.hash);
        for r in &self.rows {
            let _ = writeln!(
                s,
                "{:.10e},{:.16e},{:.16e},{:.16e},{:.16e},{:.16e}",
                r.t, r.mass, r.energy, r.h1_defect, r.c, r.rho
            );
        }
        s
    }

    pub fn track_csv(&self) -> String {
        let mut s = format!("# manifest={}\nt,c,rho,z_h1,z_h1_local\n", self.hash);
        for r in &self.track.samples {
            let _ = writeln!(
                s,
                "{:.10e},{:.16e},{:.16e},{:.16e},{:.16e}",
                r.t, r.c, r.rho, r.z_h1, r.z_h1_local
            );
        }
        s
    }

    /// Writes every table next to the manifest. Each file carries the manifest hash.
    pub fn write_outputs(&self, dir: &Path) -> Result<()> {
        std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
        let mut manifest = self.manifest.to_text();
        let _ = writeln!(manifest, "# sha256 = {}", self.hash);
        write_atomic(&dir.join("manifest.toml"), manifest.as_bytes())?;
        write_atomic(&dir.join("series.csv"), self.series_csv().as_bytes())?;
        write_atomic(&dir.join("track.csv"), self.track_csv().as_bytes())?;
        write_atomic(&dir.join("summary.txt"), self.summary_text().as_bytes())?;
        for series in [&self.mass_hat, &self.virial, &self.local_mass] {
            let mut buf = Vec::new();
            series.write_csv(&mut buf).map_err(|e| Error::io(dir, e))?;
            write_atomic(&dir.join(format!("{}.csv", series.name)), &buf)?;
        }
        if let Some(ode) = self.ode() {
            let mut buf = format!("# manifest={}\n", self.hash).into_bytes();
            ode.write_csv(&mut buf).map_err(|e| Error::io(dir, e))?;
            write_atomic(&dir.join("ode.csv"), &buf)?;
        }
        if let Some(d) = &self.defect {
            let mut buf = format!("# manifest={}\n", self.hash).into_bytes();
            d.write_csv(&mut buf).map_err(|e| Error::io(dir, e))?;
            write_atomic(&dir.join("defect.csv"), &buf)?;
        }
        Ok(())
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Drift {
    pub measured: f64,
    pub predicted: f64,
}

struct LoopSpec {
    initial: FieldState,
    c0: f64,
    rho0: f64,
    t_end: f64,
    window: Option<(f64, f64)>,
    c_inf: Option<f64>,
    /// Interaction interval; the localized residual mass is integrated over it.
    local_interval: Option<(f64, f64)>,
    snapshot_dir: Option<PathBuf>,
}

/// Subtracts `eta(eps y + 2) eps d(eps rho) A_c(y)` from the bare residual, so the
/// monitored `z` is measured against the corrected ansatz.
struct AnsatzCorrection {
    params: CorrectionParams,
    profile: Option<CorrectionProfile>,
}

impl AnsatzCorrection {
    fn for_run(man: &RunManifest) -> Result<Option<Self>> {
        let potential = man.potential()?;
        if potential.is_constant() || man.mirrored {
            return Ok(None);
        }
        let params = CorrectionParams::new(man.exponent()?, man.lambda, man.eps, potential);
        Ok(Some(AnsatzCorrection { params, profile: None }))
    }

    fn apply(&mut self, z: &mut [f64], grid: &crate::spectral::Grid, c: f64, rho: f64) -> Result<()> {
        let eps = self.params.eps;
        let (d, _) = self.params.d_coefficient(eps * rho);
        if d == 0.0 {
            return Ok(());
        }
        // A_c depends on c only
        let stale = self
            .profile
            .as_ref()
            .map(|p| (p.c - c).abs() > 1e-6 * c)
            .unwrap_or(true);
        if stale {
            self.profile = Some(solve_ac(c, rho, &self.params)?);
        }
        let prof = self.profile.as_ref().expect("solved above");
        for (j, zj) in z.iter_mut().enumerate() {
            let y = grid.periodic_offset(grid.x(j), rho);
            *zj -= cutoff(eps * y + 2.0) * eps * d * prof.value(y);
        }
        Ok(())
    }
}

/// `Q` placed at `x0`, scaled to the local amplitude `a(eps x0)^{-1/(m-1)}`.
pub fn incoming_soliton(man: &RunManifest, x0: f64, t0: f64) -> Result<FieldState> {
    let m = man.exponent()?;
    let q = ScaledSoliton::new(1.0, m)?;
    let amp = man.potential()?.a(man.eps * x0).powf(-1.0 / (m.as_f64() - 1.0));
    let grid = man.grid()?;
    Ok(FieldState::from_fn(t0, grid, |x| {
        amp * q.value(grid.periodic_offset(x, x0))
    }))
}

fn scaling_limit(man: &RunManifest) -> Option<f64> {
    let pot = man.potential().ok()?;
    match pot.profile() {
        Profile::Tanh { .. } if !man.mirrored => solve_c_infinity(man.lambda, man.m).ok().map(|l| l.c_inf),
        Profile::Constant { .. } => Some(1.0),
        _ => None,
    }
}

/// Runs the scenario described by the manifest: incoming unit soliton on flat
/// ground, stepped through the window, with outputs written to `out` if given.
pub fn simulate(man: &RunManifest, out: Option<&Path>) -> Result<RunOutput> {
    man.validate()?;
    let plan = man.plan()?;
    let initial = incoming_soliton(man, plan.x0, plan.t0)?;
    let spec = LoopSpec {
        initial,
        c0: 1.0,
        rho0: plan.x0,
        t_end: plan.window.1,
        window: Some(plan.window),
        c_inf: scaling_limit(man),
        local_interval: plan.ode.as_ref().and_then(|tr| tr.interaction_interval()),
        snapshot_dir: out.map(|d| d.join("snapshots")),
    };
    let mut output = run_loop(man, spec)?;
    output.plan = Some(plan);
    if let Some(dir) = out {
        output.write_outputs(dir)?;
    }
    Ok(output)
}

/// Forward run followed by the reflected run `v(t, x) = u(-t, -x)` with the mirrored
/// potential, started from the reflected final state.
#[derive(Clone, Debug)]
pub struct ReverseOutput {
    pub forward: RunOutput,
    pub backward: RunOutput,
    /// `|| v(-t0) - u(t0)(-x) ||_{H^1}`
    pub reproduction_error: f64,
    pub forward_drift: Drift,
    pub backward_drift: Drift,
}

pub fn reverse(man: &RunManifest, out: Option<&Path>) -> Result<ReverseOutput> {
    let forward = simulate(man, out.map(|d| d.join("forward")).as_deref())?;
    let backward = reverse_from(&forward, out.map(|d| d.join("backward")).as_deref())?;
    let target = forward.initial.reflected();
    let diff = backward.final_state.difference(&target)?;
    let reproduction_error = h1_norm(&target.grid, &diff);
    let result = ReverseOutput {
        forward_drift: forward.position_drift()?,
        backward_drift: backward.position_drift()?,
        forward,
        backward,
        reproduction_error,
    };
    if let Some(dir) = out {
        write_atomic(&dir.join("reverse.txt"), result.summary_text().as_bytes())?;
    }
    Ok(result)
}

impl ReverseOutput {
    pub fn summary_text(&self) -> String {
        format!(
            "# manifest={}\n# backward manifest={}\nreproduction_error_h1 = {}\nforward_drift = {}\nforward_predicted = {}\nbackward_drift = {}\nbackward_predicted = {}\n",
            self.forward.hash,
            self.backward.hash,
            self.reproduction_error,
            self.forward_drift.measured,
            self.forward_drift.predicted,
            self.backward_drift.measured,
            self.backward_drift.predicted,
        )
    }
}

/// Reflects the final state of `forward` and steps it back to the reflected start time
/// with the mirrored potential.
pub fn reverse_from(forward: &RunOutput, out: Option<&Path>) -> Result<RunOutput> {
    let mut man = forward.manifest.clone();
    man.mirrored = !man.mirrored;
    man.input_hash = Some(forward.hash.clone());
    let mut start = forward.final_state.reflected();
    start.t = -forward.final_state.t;
    let last = forward.track.samples.last().expect("forward track");
    let spec = LoopSpec {
        initial: start,
        c0: last.c,
        rho0: -last.rho,
        t_end: -forward.initial.t,
        window: None,
        c_inf: None,
        local_interval: None,
        snapshot_dir: out.map(|d| d.join("snapshots")),
    };
    let output = run_loop(&man, spec)?;
    if let Some(dir) = out {
        output.write_outputs(dir)?;
    }
    Ok(output)
}

fn simpson(samples: &[(f64, f64)]) -> f64 {
    let n = samples.len();
    if n < 2 {
        return 0.0;
    }
    let mut total = 0.0;
    let mut i = 0;
    while i + 2 < n {
        let h = samples[i + 2].0 - samples[i].0;
        total += h / 6.0 * (samples[i].1 + 4.0 * samples[i + 1].1 + samples[i + 2].1);
        i += 2;
    }
    if i + 1 < n {
        total += 0.5 * (samples[i + 1].0 - samples[i].0) * (samples[i].1 + samples[i + 1].1);
    }
    total
}

fn run_loop(man: &RunManifest, spec: LoopSpec) -> Result<RunOutput> {
    let clock = Instant::now();
    let hash = man.hash();
    let cfg = man.stepper_config()?;
    let m = cfg.m;
    let diag = DiagnosticParams::from(&cfg);
    let weight = VirialWeight::new(man.virial_scale)?;
    let mut correction = AnsatzCorrection::for_run(man)?;
    let mut stepper = Stepper::new(cfg.clone(), &spec.initial)?;
    let initial = stepper.state();
    let t0 = initial.t;
    let mut tracker = Tracker::new(
        Ansatz::new(m, man.eps, cfg.potential),
        man.lambda,
        spec.c0,
        spec.rho0,
        t0,
    )
    .with_weight_scale(man.virial_scale);
    let total = ((spec.t_end - t0) / cfg.dt).round().max(0.0) as u64;
    let sample_steps = ((man.sample_every / cfg.dt).round() as u64).max(1);
    let flux_steps = man.flux_every as u64;
    let snap_steps = if man.snapshot_every > 0.0 {
        ((man.snapshot_every / cfg.dt).round() as u64).max(1)
    } else {
        0
    };
    if let Some(dir) = &spec.snapshot_dir {
        std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    }

    let mut rows = Vec::new();
    let mut mass_hat = FunctionalSeries::new("mass_hat").with_manifest(hash.clone());
    let mut virial = FunctionalSeries::new("virial").with_manifest(hash.clone());
    let mut local_mass = FunctionalSeries::new("local_mass").with_manifest(hash.clone());
    let mut flux_samples = Vec::new();
    let mut window_states = Vec::new();
    let mut snapshots = Vec::new();
    let mut snapshot_index = format!("# manifest={hash}\nfile,t\n");
    let (mass0, _) = mass_and_flux(&initial, &cfg);
    let energy0 = energy_with(stepper.ops(), &initial, &cfg);
    let mut energy_drift: f64 = 0.0;
    let mut local_prev: Option<(f64, f64)> = None;
    let mut local_mass_integral = 0.0;
    let mut edge_max: f64 = 0.0;
    let mut reentry = None;

    let mut k: u64 = 0;
    loop {
        let at_end = k == total;
        if k.is_multiple_of(flux_steps) || at_end {
            let s = stepper.state();
            let (_, flux) = mass_and_flux(&s, &cfg);
            flux_samples.push((s.t, flux));
        }
        if k.is_multiple_of(sample_steps) || at_end {
            let s = stepper.state();
            let (mass, _) = mass_and_flux(&s, &cfg);
            let energy = energy_with(stepper.ops(), &s, &cfg);
            energy_drift = energy_drift.max((energy - energy0).abs() / energy0.abs());
            let (sample, dec) = tracker.push(&s)?;
            rows.push(SeriesRow {
                t: s.t,
                mass,
                energy,
                h1_defect: sample.z_h1,
                c: sample.c,
                rho: sample.rho,
            });
            mass_hat.push(s.t, modified_mass_hat(&s, &diag))?;
            let mut zc = dec.z;
            if let Some(corr) = correction.as_mut() {
                corr.apply(&mut zc, &s.grid, sample.c, sample.rho)?;
            }
            let local = localized_h1_mass(stepper.ops(), &zc, sample.rho, man.virial_scale);
            let z = FieldState {
                t: s.t,
                grid: s.grid,
                values: zc,
            };
            virial.push(s.t, virial_functional(&z, sample.rho, &weight))?;
            local_mass.push(s.t, local)?;
            if let Some((tp, lp)) = local_prev {
                let (a, b) = spec.local_interval.unwrap_or((f64::NEG_INFINITY, f64::INFINITY));
                // trapezoid on the part of [tp, t] inside the interval
                let (lo, hi) = (tp.max(a), s.t.min(b));
                if hi > lo {
                    let at = |t: f64| lp + (local - lp) * (t - tp) / (s.t - tp);
                    local_mass_integral += 0.5 * (hi - lo) * (at(lo) + at(hi));
                }
            }
            local_prev = Some((s.t, local));
            if let Some((w0, w1)) = spec.window {
                if s.t >= w0 - 1e-9 && s.t <= w1 + 1e-9 {
                    let edge = edge_amplitude(&s, man.edge_width);
                    edge_max = edge_max.max(edge);
                    if reentry.is_none() && edge > man.reentry_threshold {
                        reentry = Some(s.t);
                    }
                    window_states.push((s.clone(), sample.c, sample.rho));
                }
            }
        }
        if let Some(dir) = &spec.snapshot_dir {
            if (snap_steps > 0 && k.is_multiple_of(snap_steps)) || at_end {
                let s = stepper.state();
                let name = format!("snap_{k:09}.bin");
                let path = dir.join(&name);
                save_snapshot(
                    &Snapshot {
                        m: m.as_f64(),
                        lambda: cfg.lambda,
                        eps: cfg.eps,
                        gamma: cfg.potential_gamma(),
                        state: s.clone(),
                    },
                    &path,
                )?;
                let _ = writeln!(snapshot_index, "{name},{:.10e}", s.t);
                snapshots.push(path);
            }
        }
        if at_end {
            break;
        }
        stepper.step()?;
        k += 1;
    }
    if let Some(dir) = &spec.snapshot_dir {
        write_atomic(&dir.join("index.csv"), snapshot_index.as_bytes())?;
    }

    let final_state = stepper.state();
    let (mass_end, _) = mass_and_flux(&final_state, &cfg);
    let mass_change = mass_end - mass0;
    let mass_residual = (mass_change - simpson(&flux_samples)).abs() / mass0;

    let defect = match spec.window {
        Some((w0, w1)) if !window_states.is_empty() => {
            let mut rhos: Vec<f64> = window_states.iter().map(|w| w.2).collect();
            rhos.sort_by(|a, b| a.total_cmp(b));
            let rho_mid = rhos[rhos.len() / 2];
            let kappa = cfg.potential.a(cfg.eps * rho_mid).powf(-1.0 / (m.as_f64() - 1.0));
            Some(measure_defect(
                &window_states,
                m,
                kappa,
                spec.c_inf,
                (w1 - w0 - 2.0 * man.sample_every).max(0.0),
            )?)
        }
        _ => None,
    };

    Ok(RunOutput {
        manifest: man.clone(),
        hash,
        plan: None,
        rows,
        track: tracker.into_track(),
        defect,
        mass_residual,
        mass_change,
        energy_drift,
        mass_hat,
        virial,
        local_mass,
        local_mass_integral,
        edge_max,
        reentry,
        initial,
        final_state,
        snapshots,
        steps: stepper.steps(),
        elapsed: clock.elapsed().as_secs_f64(),
    })
}
