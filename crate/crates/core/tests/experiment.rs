use std::fs;
use std::path::Path;

use gkdv_core::effective::Branch;
use gkdv_core::experiment::{parse_lambda_grid, reverse, roots_table, simulate, PotentialKind, RunManifest};
use gkdv_core::soliton::Exponent;
use gkdv_core::spectral::load_snapshot;

// constant potential: the soliton just travels, the run takes a second or so
fn flat(lambda: f64) -> RunManifest {
    let mut man = RunManifest {
        lambda,
        eps: 0.1,
        potential: PotentialKind::Constant,
        n: 1024,
        length: 120.0,
        dt: 0.01,
        x0: Some(-30.0),
        window_start: Some(0.0),
        window_end: Some(10.0),
        sample_every: 1.0,
        ..Default::default()
    };
    man.snapshot_every = 5.0;
    man
}

// coarse tanh scenario at a large eps; enough to cross the ramp
fn coarse(lambda: f64) -> RunManifest {
    let mut man = RunManifest::scenario(2, lambda, 0.5).unwrap();
    man.n = 2048;
    man.length = 300.0;
    man.dt = 0.01;
    man.window_length = 5.0;
    man.sample_every = 1.0;
    man
}

fn first_line(path: &Path) -> String {
    fs::read_to_string(path)
        .unwrap()
        .lines()
        .next()
        .unwrap_or("")
        .to_string()
}

#[test]
fn repeated_runs_are_bit_identical() {
    let man = flat(0.3);
    let a = tempfile::tempdir().unwrap();
    let b = tempfile::tempdir().unwrap();
    let ra = simulate(&man, Some(a.path())).unwrap();
    let rb = simulate(&man, Some(b.path())).unwrap();
    assert_eq!(ra.final_state.values, rb.final_state.values);
    assert!(!ra.snapshots.is_empty());
    for (sa, sb) in ra.snapshots.iter().zip(&rb.snapshots) {
        assert_eq!(fs::read(sa).unwrap(), fs::read(sb).unwrap());
    }
    assert_eq!(
        fs::read(a.path().join("series.csv")).unwrap(),
        fs::read(b.path().join("series.csv")).unwrap()
    );
}

#[test]
fn every_table_names_its_manifest() {
    let man = flat(0.3);
    let dir = tempfile::tempdir().unwrap();
    let run = simulate(&man, Some(dir.path())).unwrap();
    assert_eq!(run.hash, man.hash());
    for name in [
        "series.csv",
        "track.csv",
        "summary.txt",
        "mass_hat.csv",
        "virial.csv",
        "defect.csv",
    ] {
        let line = first_line(&dir.path().join(name));
        assert!(line.contains(&run.hash), "{name}: {line}");
    }
    let text = fs::read_to_string(dir.path().join("manifest.toml")).unwrap();
    let back = RunManifest::from_text(&text).unwrap();
    assert_eq!(back.hash(), run.hash);
    let snap = load_snapshot(&run.snapshots[0]).unwrap();
    assert_eq!(snap.lambda, man.lambda);
    assert_eq!(snap.state.grid.n(), man.n);
}

#[test]
fn flat_ground_keeps_the_soliton() {
    let run = simulate(&flat(0.3), None).unwrap();
    let d = run.defect.as_ref().unwrap();
    assert!((d.c_plus - 1.0).abs() < 1e-6, "c+ = {}", d.c_plus);
    assert!(d.liminf_estimate < 1e-5, "defect {}", d.liminf_estimate);
    assert!(run.mass_residual < 1e-7, "mass {}", run.mass_residual);
    assert!(run.energy_drift < 1e-8, "energy {}", run.energy_drift);
    assert!(run.reentry.is_none());
    let last = run.track.samples.last().unwrap();
    let expected = -30.0 + 0.7 * (last.t - run.initial.t);
    assert!((last.rho - expected).abs() < 1e-4, "{} vs {}", last.rho, expected);
}

#[test]
fn overrides_change_the_hash() {
    let man = flat(0.3);
    let mut other = man.clone();
    other.apply_overrides(&["dt=0.005"]).unwrap();
    assert_ne!(man.hash(), other.hash());
    other.apply_overrides(&["dt=0.01"]).unwrap();
    assert_eq!(man.hash(), other.hash());
    assert!(other.apply_overrides(&["nonsense=1"]).is_err());
    assert!(other.apply_overrides(&["dt"]).is_err());
}

#[test]
fn roots_table_contains_the_unit_row_and_one_branch_change() {
    for m in [2, 3, 4] {
        let grid = parse_lambda_grid("0.02:0.98:25").unwrap();
        let rows = roots_table(m, &grid).unwrap();
        let l0 = Exponent::new(m).unwrap().lambda0();
        let unit = rows.iter().find(|r| r.lambda == l0).unwrap();
        assert!((unit.c_inf - 1.0).abs() < 1e-12);
        let flips = rows.windows(2).filter(|w| w[0].branch != w[1].branch).count();
        assert_eq!(flips, 1);
        assert_eq!(rows[0].branch, Branch::Refraction);
        assert_eq!(rows.last().unwrap().branch, Branch::Reflection);
        for r in &rows {
            assert!(r.c_inf > 0.0 && r.c_inf.is_finite());
        }
    }
}

#[test]
fn roots_reject_the_threshold() {
    let lt = gkdv_core::effective::solve_lambda_tilde(2).unwrap();
    assert!(roots_table(2, &[lt]).is_err());
    assert!(parse_lambda_grid("0.1:0.9").is_err());
}

#[test]
fn refraction_run_follows_the_ode() {
    let run = simulate(&coarse(0.3), None).unwrap();
    let ode = run.ode().unwrap();
    let d = run.defect.as_ref().unwrap();
    let c_ode = ode.last().c;
    assert!((d.c_plus - c_ode).abs() < 0.1, "c+ {} vs {}", d.c_plus, c_ode);
    assert!(d.c_plus > 1.2);
    // mass loss only through the scheme
    assert!(run.mass_residual < 1e-7, "{}", run.mass_residual);
}

#[test]
fn reversed_run_returns_to_the_start() {
    let man = coarse(0.3);
    let res = reverse(&man, None).unwrap();
    assert_eq!(
        res.backward.manifest.input_hash.as_deref(),
        Some(res.forward.hash.as_str())
    );
    assert!(res.backward.manifest.mirrored);
    assert!(res.reproduction_error < 1e-4, "{}", res.reproduction_error);
}

#[test]
fn auto_start_needs_a_ramp() {
    let mut man = flat(0.3);
    man.x0 = None;
    assert!(simulate(&man, None).is_err());
    let mut man = flat(0.3);
    man.window_start = Some(-1000.0);
    assert!(simulate(&man, None).is_err());
}
