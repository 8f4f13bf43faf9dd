//! Quick invariant suite over every module at small sizes.

use std::fmt;
use std::path::PathBuf;

use crate::correction::{solve_ac, CorrectionParams};
use crate::diagnostics::{Chi, VirialWeight};
use crate::effective::{
    integrate_forward, lambda_tilde_residual, solve_c_infinity, solve_lambda_tilde, EffectiveParams, StartRule,
};
use crate::error::Result;
use crate::modulation::{decompose, Ansatz};
use crate::potential::{make_tanh_potential, validate_hypotheses, Potential};
use crate::soliton::{Exponent, ScaledSoliton};
use crate::spectral::{h1_norm, load_snapshot, save_snapshot, FieldState, Grid, Snapshot, Stepper, StepperConfig};

#[derive(Clone, Debug, Default)]
pub struct SelftestOptions {
    /// Multiplies the closed-form `f2` the correction solver is compared with.
    pub xi_scale: Option<f64>,
    /// Snapshot file that must load cleanly.
    pub fixture: Option<PathBuf>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct Check {
    pub module: &'static str,
    pub name: &'static str,
    pub passed: bool,
    pub detail: String,
}

#[derive(Clone, Debug, Default, PartialEq)]
pub struct SelftestReport {
    pub checks: Vec<Check>,
}

impl SelftestReport {
    pub fn passed(&self) -> bool {
        self.checks.iter().all(|c| c.passed)
    }

    pub fn failures(&self) -> impl Iterator<Item = &Check> {
        self.checks.iter().filter(|c| !c.passed)
    }

    fn record(&mut self, module: &'static str, name: &'static str, outcome: Result<(bool, String)>) {
        let (passed, detail) = outcome.unwrap_or_else(|e| (false, format!("error: {e}")));
        self.checks.push(Check {
            module,
            name,
            passed,
            detail,
        });
    }
}

impl fmt::Display for SelftestReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for c in &self.checks {
            writeln!(
                f,
                "{} {}::{} {}",
                if c.passed { "PASS" } else { "FAIL" },
                c.module,
                c.name,
                c.detail
            )?;
        }
        let failed = self.failures().count();
        write!(f, "{} checks, {} failed", self.checks.len(), failed)
    }
}

pub fn selftest(opts: &SelftestOptions) -> SelftestReport {
    let mut r = SelftestReport::default();
    r.record("soliton_core", "mass_scaling", mass_scaling());
    r.record("potential", "tanh_hypotheses", hypotheses());
    r.record("effective_dynamics", "threshold_roots", roots());
    r.record("effective_dynamics", "first_integral", first_integral());
    r.record("spectral_pde", "transport", transport());
    r.record("spectral_pde", "snapshot_roundtrip", snapshot_roundtrip());
    if let Some(path) = &opts.fixture {
        r.record(
            "spectral_pde",
            "snapshot_fixture",
            load_snapshot(path).map(|s| (true, format!("{} samples", s.state.values.len()))),
        );
    }
    r.record("modulation", "exact_decomposition", exact_decomposition());
    r.record(
        "linearized_correction",
        "f2_agreement",
        f2_agreement(opts.xi_scale.unwrap_or(1.0)),
    );
    r.record("diagnostics", "chi_cubic", chi_cubic());
    r.record("diagnostics", "phi_bounds", phi_bounds());
    r
}

fn mass_scaling() -> Result<(bool, String)> {
    let mut worst: f64 = 0.0;
    for m in Exponent::all() {
        let q1 = ScaledSoliton::new(1.0, m)?.integrate_power(2);
        let c = 1.7;
        let qc = ScaledSoliton::new(c, m)?.integrate_power(2);
        worst = worst.max((qc / q1 - c.powf(2.0 * m.theta())).abs());
    }
    Ok((worst < 1e-12, format!("max error {worst:.2e}")))
}

fn hypotheses() -> Result<(bool, String)> {
    let p = make_tanh_potential(1.0)?;
    let ok = Exponent::all().iter().all(|&m| validate_hypotheses(&p, m).all_passed());
    Ok((ok, String::new()))
}

fn roots() -> Result<(bool, String)> {
    let mut worst: f64 = 0.0;
    for m in 2..=4 {
        let e = Exponent::new(m)?;
        let lt = solve_lambda_tilde(m)?;
        worst = worst.max(lambda_tilde_residual(e, lt).abs());
        worst = worst.max((solve_c_infinity(e.lambda0(), m)?.c_inf - 1.0).abs());
    }
    Ok((worst < 1e-12, format!("max residual {worst:.2e}")))
}

fn first_integral() -> Result<(bool, String)> {
    let p = EffectiveParams::new(2, 0.3, 0.2, make_tanh_potential(1.0)?)?.with_start(StartRule::Flat);
    let drift = integrate_forward(&p)?.first_integral_drift();
    Ok((drift < 1e-8, format!("drift {drift:.2e}")))
}

fn transport() -> Result<(bool, String)> {
    let m = Exponent::new(2)?;
    let lambda = 0.3;
    let grid = Grid::new(512, 60.0)?;
    let q = ScaledSoliton::new(1.0, m)?;
    let u0 = FieldState::from_fn(0.0, grid, |x| q.value(x));
    let cfg = StepperConfig::new(m, lambda, 0.1, Potential::constant(1.0), 0.005);
    let mut st = Stepper::new(cfg, &u0)?;
    let t_end = 5.0;
    st.advance_to(t_end)?;
    let exact = FieldState::from_fn(t_end, grid, |x| {
        q.value(grid.periodic_offset(x, (1.0 - lambda) * t_end))
    });
    let err = h1_norm(&grid, &st.state().difference(&exact)?) / h1_norm(&grid, &exact.values);
    Ok((err < 1e-6, format!("relative H1 error {err:.2e}")))
}

fn snapshot_roundtrip() -> Result<(bool, String)> {
    let grid = Grid::new(256, 40.0)?;
    let snap = Snapshot {
        m: 2.0,
        lambda: 0.3,
        eps: 0.1,
        gamma: 1.0,
        state: FieldState::from_fn(1.5, grid, |x| (-x * x).exp()),
    };
    let dir = std::env::temp_dir().join(format!("gkdv-selftest-{}", std::process::id()));
    std::fs::create_dir_all(&dir).map_err(|e| crate::error::Error::io(&dir, e))?;
    let path = dir.join("roundtrip.bin");
    save_snapshot(&snap, &path)?;
    let back = load_snapshot(&path);
    let _ = std::fs::remove_dir_all(&dir);
    let back = back?;
    Ok((back == snap, String::new()))
}

fn exact_decomposition() -> Result<(bool, String)> {
    let m = Exponent::new(2)?;
    let pot = Potential::constant(1.0);
    let ansatz = Ansatz::new(m, 0.1, pot);
    let grid = Grid::new(1024, 80.0)?;
    let q = ScaledSoliton::new(1.2, m)?;
    let u = FieldState::from_fn(0.0, grid, |x| q.value(x - 3.3));
    let d = decompose(&u, &ansatz, (1.1, 3.0))?;
    let err = (d.c - 1.2).abs().max((d.rho - 3.3).abs());
    Ok((err < 1e-8, format!("parameter error {err:.2e}")))
}

fn f2_agreement(xi_scale: f64) -> Result<(bool, String)> {
    let mut worst: f64 = 0.0;
    for m in [2, 4] {
        let p = CorrectionParams::new(Exponent::new(m)?, 0.3, 0.1, make_tanh_potential(1.0)?);
        let prof = solve_ac(1.0, 0.0, &p)?;
        worst = worst.max((prof.recovered_f2 - xi_scale * p.f2_closed_form(1.0, 0.0)).abs());
    }
    Ok((worst < 1e-6, format!("max mismatch {worst:.2e}")))
}

fn chi_cubic() -> Result<(bool, String)> {
    let m = Exponent::new(3)?;
    let chi = Chi::new(1.0, m)?;
    let q = ScaledSoliton::new(1.0, m)?;
    let worst = (0..2000)
        .map(|i| {
            let y = -20.0 + i as f64 * 0.02;
            (chi.value(y) - 0.5 * y * q.value(y)).abs()
        })
        .fold(0.0, f64::max);
    Ok((worst < 1e-8, format!("max error {worst:.2e}")))
}

fn phi_bounds() -> Result<(bool, String)> {
    let ok = (0..10_000).all(|i| {
        let x = i as f64 * 5e-4;
        let p = VirialWeight::phi(x);
        let e = (-x).exp();
        p >= e * (1.0 - 1e-14) && p <= 3.0 * e
    });
    Ok((ok, String::new()))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn clean_run_passes() {
        let r = selftest(&SelftestOptions::default());
        assert!(r.passed(), "{r}");
    }

    #[test]
    fn tampered_constant_fails() {
        let r = selftest(&SelftestOptions {
            xi_scale: Some(1.01),
            fixture: None,
        });
        let failed: Vec<_> = r.failures().map(|c| c.name).collect();
        assert_eq!(failed, vec!["f2_agreement"]);
    }

    #[test]
    fn corrupted_fixture_fails() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("bad.bin");
        std::fs::write(&path, b"GKDVgarbage").unwrap();
        let r = selftest(&SelftestOptions {
            xi_scale: None,
            fixture: Some(path),
        });
        assert!(!r.passed());
        assert_eq!(r.failures().next().unwrap().name, "snapshot_fixture");
    }
}
