//! Epsilon sweeps with log-log fits of the terminal quantities.

use std::fmt::Write as _;
use std::path::Path;
use std::sync::Mutex;

use crate::error::{Error, Result};
use crate::fit::linear_fit;
use crate::spectral::write_atomic;

use super::manifest::{PotentialKind, RunManifest};
use super::run::{simulate, RunOutput};

#[derive(Clone, Debug, PartialEq)]
pub struct SweepRow {
    pub eps: f64,
    pub manifest_hash: String,
    pub c_plus: f64,
    pub c_inf: f64,
    pub c_gap: f64,
    pub defect_min: f64,
    pub defect_max: f64,
    pub local_mass_integral: f64,
    pub mass_hat_rise: f64,
    pub energy_drift: f64,
    pub mass_residual: f64,
    /// Fitted `rho'` over the terminal window.
    pub window_speed: f64,
    pub reentry: bool,
    /// Set when the member run failed; the other fields are then NaN.
    pub error: Option<String>,
}

impl SweepRow {
    fn from_output(eps: f64, out: &RunOutput) -> Self {
        let d = out.defect.as_ref();
        let c_plus = d.map(|d| d.c_plus).unwrap_or(f64::NAN);
        let c_inf = d.and_then(|d| d.c_inf).unwrap_or(f64::NAN);
        let (lo, hi) = d
            .map(|d| {
                d.samples
                    .iter()
                    .fold((f64::INFINITY, 0.0f64), |(lo, hi), s| (lo.min(s.1), hi.max(s.1)))
            })
            .unwrap_or((f64::NAN, f64::NAN));
        SweepRow {
            eps,
            manifest_hash: out.hash.clone(),
            c_plus,
            c_inf,
            c_gap: (c_plus - c_inf).abs(),
            defect_min: lo,
            defect_max: hi,
            local_mass_integral: out.local_mass_integral,
            mass_hat_rise: out.mass_hat_rise(),
            energy_drift: out.energy_drift,
            mass_residual: out.mass_residual,
            window_speed: out.window_speed().unwrap_or(f64::NAN),
            reentry: out.reentry.is_some(),
            error: None,
        }
    }

    fn failed(eps: f64, hash: String, e: &Error) -> Self {
        SweepRow {
            eps,
            manifest_hash: hash,
            c_plus: f64::NAN,
            c_inf: f64::NAN,
            c_gap: f64::NAN,
            defect_min: f64::NAN,
            defect_max: f64::NAN,
            local_mass_integral: f64::NAN,
            mass_hat_rise: f64::NAN,
            energy_drift: f64::NAN,
            mass_residual: f64::NAN,
            window_speed: f64::NAN,
            reentry: false,
            error: Some(e.to_string()),
        }
    }
}

/// Slope of a log-log fit with a 95% interval from the residual scatter.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ExponentFit {
    pub exponent: f64,
    pub stderr: f64,
    pub lo: f64,
    pub hi: f64,
}

fn student_t95(dof: usize) -> f64 {
    const T: [f64; 10] = [12.706, 4.303, 3.182, 2.776, 2.571, 2.447, 2.365, 2.306, 2.262, 2.228];
    if dof == 0 {
        f64::INFINITY
    } else {
        T.get(dof - 1).copied().unwrap_or(1.96)
    }
}

/// Fits `log y = p log eps + b`.
pub fn fit_exponent(points: &[(f64, f64)]) -> Option<ExponentFit> {
    let logs: Vec<(f64, f64)> = points
        .iter()
        .filter(|p| p.0 > 0.0 && p.1 > 0.0 && p.1.is_finite())
        .map(|&(x, y)| (x.ln(), y.ln()))
        .collect();
    if logs.len() < 2 {
        return None;
    }
    let f = linear_fit(&logs);
    let n = logs.len();
    let mx = logs.iter().map(|p| p.0).sum::<f64>() / n as f64;
    let sxx: f64 = logs.iter().map(|p| (p.0 - mx).powi(2)).sum();
    let sse: f64 = logs.iter().map(|p| (p.1 - f.slope * p.0 - f.intercept).powi(2)).sum();
    let stderr = if n > 2 {
        (sse / (n - 2) as f64 / sxx).sqrt()
    } else {
        f64::NAN
    };
    let half = student_t95(n.saturating_sub(2)) * stderr;
    Some(ExponentFit {
        exponent: f.slope,
        stderr,
        lo: f.slope - half,
        hi: f.slope + half,
    })
}

#[derive(Clone, Debug, PartialEq)]
pub struct SweepResult {
    /// Rows in strictly decreasing `eps`.
    pub rows: Vec<SweepRow>,
    /// Window-minimum defect of the `a = 1` control run.
    pub control_floor: Option<f64>,
    pub gap_fit: Option<ExponentFit>,
    pub defect_fit: Option<ExponentFit>,
    pub local_mass_fit: Option<ExponentFit>,
    /// False when a member failed or saw re-entry; fits then use the remaining rows.
    pub complete: bool,
}

impl SweepResult {
    pub fn to_csv(&self, base_hash: &str) -> String {
        let mut s = format!(
            "# sweep base manifest={base_hash}\neps,c_plus,c_inf,c_gap,defect_min,defect_max,local_mass,mass_hat_rise,energy_drift,mass_residual,window_speed,reentry,manifest,status\n"
        );
        for r in &self.rows {
            let _ = writeln!(
                s,
                "{},{:.12e},{:.12e},{:.6e},{:.6e},{:.6e},{:.6e},{:.3e},{:.3e},{:.3e},{:.6e},{},{},{}",
                r.eps,
                r.c_plus,
                r.c_inf,
                r.c_gap,
                r.defect_min,
                r.defect_max,
                r.local_mass_integral,
                r.mass_hat_rise,
                r.energy_drift,
                r.mass_residual,
                r.window_speed,
                r.reentry,
                r.manifest_hash,
                r.error.as_deref().unwrap_or("ok").replace(',', ";")
            );
        }
        s
    }

    pub fn fits_text(&self, base_hash: &str) -> String {
        let mut s = format!("# sweep base manifest={base_hash}\n");
        let line = |s: &mut String, name: &str, f: &Option<ExponentFit>| {
            let _ = match f {
                Some(f) => writeln!(
                    s,
                    "{name} = {:.4} (stderr {:.4}, 95% [{:.4}, {:.4}])",
                    f.exponent, f.stderr, f.lo, f.hi
                ),
                None => writeln!(s, "{name} = none"),
            };
        };
        line(&mut s, "c_gap_exponent", &self.gap_fit);
        line(&mut s, "defect_exponent", &self.defect_fit);
        line(&mut s, "local_mass_exponent", &self.local_mass_fit);
        let _ = writeln!(
            s,
            "control_floor = {}",
            self.control_floor
                .map(|v| v.to_string())
                .unwrap_or_else(|| "none".into())
        );
        let _ = writeln!(s, "complete = {}", self.complete);
        s
    }
}

/// Member manifest for one `eps`: the base with the domain resized.
pub fn member_manifest(base: &RunManifest, eps: f64) -> Result<RunManifest> {
    let mut m = base.clone();
    m.eps = eps;
    m.autosize()?;
    Ok(m)
}

/// Control run with `a = 1` over the same geometry and time span as `like`.
pub fn control_manifest(like: &RunManifest) -> Result<RunManifest> {
    let plan = like.plan()?;
    let mut c = like.clone();
    c.potential = PotentialKind::Constant;
    c.a_value = 1.0;
    c.x0 = Some(plan.x0);
    c.window_start = Some(plan.window.0);
    c.window_end = Some(plan.window.1);
    Ok(c)
}

/// Runs every member (up to `jobs` at a time) and fits the scaling exponents.
/// Member outputs go to `out/eps_<eps>/` and the control run to `out/control/`.
pub fn sweep(
    base: &RunManifest,
    eps_list: &[f64],
    jobs: usize,
    control: bool,
    out: Option<&Path>,
) -> Result<SweepResult> {
    let mut eps: Vec<f64> = eps_list.to_vec();
    eps.sort_by(|a, b| b.total_cmp(a));
    eps.dedup();
    if eps.len() < 4 {
        return Err(Error::invalid(
            "eps",
            eps.len() as f64,
            "a sweep needs at least 4 distinct values",
        ));
    }
    if eps[0] / eps[eps.len() - 1] < 4.0 - 1e-12 {
        return Err(Error::invalid(
            "eps",
            eps[0] / eps[eps.len() - 1],
            "values must span a factor of at least 4",
        ));
    }
    let mut members = Vec::new();
    for &e in &eps {
        members.push(member_manifest(base, e)?);
    }
    let mut tasks: Vec<(usize, RunManifest)> = members.iter().cloned().enumerate().collect();
    let control_index = tasks.len();
    if control {
        tasks.push((control_index, control_manifest(&members[0])?));
    }
    let queue = Mutex::new(tasks);
    let results: Mutex<Vec<Option<Result<RunOutput>>>> = Mutex::new((0..=control_index).map(|_| None).collect());
    let jobs = jobs.max(1);
    std::thread::scope(|scope| {
        for _ in 0..jobs {
            scope.spawn(|| loop {
                let task = queue.lock().expect("queue").pop();
                let Some((i, man)) = task else { break };
                let dir = out.map(|d| {
                    if i == control_index {
                        d.join("control")
                    } else {
                        d.join(format!("eps_{}", man.eps))
                    }
                });
                let r = simulate(&man, dir.as_deref());
                results.lock().expect("results")[i] = Some(r);
            });
        }
    });
    let results = results.into_inner().expect("results");
    let mut rows = Vec::new();
    let mut complete = true;
    for (i, man) in members.iter().enumerate() {
        match results[i].as_ref().expect("every member ran") {
            Ok(o) => {
                let row = SweepRow::from_output(man.eps, o);
                complete &= !row.reentry;
                rows.push(row);
            }
            Err(e) => {
                complete = false;
                rows.push(SweepRow::failed(man.eps, man.hash(), e));
            }
        }
    }
    let control_floor = if control {
        match results[control_index].as_ref().expect("control ran") {
            Ok(o) => o.defect.as_ref().map(|d| d.liminf_estimate),
            Err(_) => {
                complete = false;
                None
            }
        }
    } else {
        None
    };
    let ok: Vec<&SweepRow> = rows.iter().filter(|r| r.error.is_none()).collect();
    let pts = |f: &dyn Fn(&SweepRow) -> f64| ok.iter().map(|r| (r.eps, f(r))).collect::<Vec<_>>();
    let result = SweepResult {
        gap_fit: fit_exponent(&pts(&|r| r.c_gap)),
        defect_fit: fit_exponent(&pts(&|r| r.defect_min)),
        local_mass_fit: fit_exponent(&pts(&|r| r.local_mass_integral)),
        rows,
        control_floor,
        complete,
    };
    if let Some(dir) = out {
        std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
        let h = base.hash();
        let mut man = base.to_text();
        let _ = writeln!(man, "# sha256 = {h}");
        write_atomic(&dir.join("base_manifest.toml"), man.as_bytes())?;
        write_atomic(&dir.join("sweep.csv"), result.to_csv(&h).as_bytes())?;
        write_atomic(&dir.join("fits.txt"), result.fits_text(&h).as_bytes())?;
    }
    Ok(result)
}
