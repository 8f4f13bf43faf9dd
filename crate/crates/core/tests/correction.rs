use gkdv_core::correction::{apply_l, residual_of_ansatz, solve_ac, solve_ac_checked, CorrectionParams};
use gkdv_core::fit::log_log_slope;
use gkdv_core::{make_tanh_potential, Error, Exponent, Potential, ScaledSoliton};
use proptest::prelude::*;

fn exp(m: u32) -> Exponent {
    Exponent::new(m).unwrap()
}

fn params(m: u32, lambda: f64) -> CorrectionParams {
    CorrectionParams::new(exp(m), lambda, 0.1, make_tanh_potential(1.0).unwrap())
}

// a'/a at 0 by a centred difference of the potential itself
fn log_slope_fd(p: &Potential, s: f64) -> f64 {
    let h = 1e-5;
    (p.a(s + h).ln() - p.a(s - h).ln()) / (2.0 * h)
}

#[test]
fn quadratic_example_value() {
    let p = params(2, 0.3);
    let prof = solve_ac(1.0, 0.0, &p).unwrap();
    let expected = -(2.0 / 3.0) * (0.3 - 3.0 * 0.6) * log_slope_fd(&p.potential, 0.0);
    assert!(
        (prof.recovered_f2 - expected).abs() < 1e-6,
        "{} vs {expected}",
        prof.recovered_f2
    );
}

#[test]
fn recovered_f2_matches_closed_form() {
    for m in [2, 4] {
        for &(c, lambda, rho) in &[(1.0, 0.3, 0.0), (1.5, 0.6, -3.0), (0.6, 0.05, 4.0)] {
            let p = params(m, lambda);
            let prof = solve_ac_checked(c, rho, &p, 1e-6).unwrap();
            // independent constant: xi_m from the explicit soliton integrals
            let q = ScaledSoliton::new(1.0, exp(m)).unwrap();
            let mf = m as f64;
            let xi = (3.0 - mf) / (5.0 - mf).powi(2) * q.integrate_power(1).powi(2) / q.integrate_power(2);
            let l0 = (5.0 - mf) / (m as f64 + 3.0);
            let expected = -(xi / c.sqrt()) * (lambda - 3.0 * l0 * c) * log_slope_fd(&p.potential, 0.1 * rho);
            assert!(
                (prof.recovered_f2 - expected).abs() < 1e-6,
                "m={m} c={c}: {} vs {expected}",
                prof.recovered_f2
            );
        }
    }
}

#[test]
fn cubic_case_has_no_position_correction() {
    let p = params(3, 0.3);
    let prof = solve_ac(1.2, 1.0, &p).unwrap();
    assert!(prof.recovered_f2.abs() < 1e-10);
    assert!(prof.values.iter().any(|v| v.abs() > 0.1));
    assert_eq!(prof.backward_f2(), -prof.recovered_f2);
}

#[test]
fn cubic_boundary_value() {
    for &(c, lambda) in &[(1.0, 0.3), (1.6, 0.2), (0.8, 0.5)] {
        let p = params(3, lambda);
        let prof = solve_ac(c, 0.0, &p).unwrap();
        let q = ScaledSoliton::new(c, exp(3)).unwrap();
        let limit = -(c - lambda) * q.integrate_power(1) / (2.0 * c);
        assert!((prof.backward_right_limit() - limit).abs() < 1e-8);
        assert!((prof.value(-1e3) + limit).abs() < 1e-8);
    }
}

#[test]
fn grid_converged() {
    for m in [2, 3, 4] {
        let mut p = params(m, 0.4);
        let a = solve_ac(1.1, 0.0, &p).unwrap();
        p.h /= 2.0;
        let b = solve_ac(1.1, 0.0, &p).unwrap();
        assert!((a.recovered_f2 - b.recovered_f2).abs() < 1e-8);
    }
}

#[test]
fn decays_on_the_right() {
    for m in [2, 3, 4] {
        let c = 1.3;
        let prof = solve_ac(c, 0.0, &params(m, 0.3)).unwrap();
        let gamma = prof.decay_rate(5.0, 1e-13);
        assert!(gamma > 0.3 * c.sqrt(), "m={m}: gamma {gamma}");
        assert!(prof.values.last().unwrap().abs() < 1e-12);
    }
}

#[test]
fn short_truncation_is_reported() {
    let mut p = params(2, 0.3);
    p.y_factor = 8.0;
    assert!(matches!(solve_ac(1.0, 0.0, &p), Err(Error::TruncationTooSmall { .. })));
}

#[test]
fn csv_has_metadata_header() {
    let prof = solve_ac(1.0, 0.0, &params(2, 0.3)).unwrap();
    let mut buf = Vec::new();
    prof.write_csv(&mut buf).unwrap();
    let text = String::from_utf8(buf).unwrap();
    assert!(text.lines().any(|l| l.starts_with("# recovered_f2=")));
    assert!(text.lines().any(|l| l == "y,Ac"));
    assert_eq!(
        text.lines().filter(|l| !l.starts_with('#')).count(),
        prof.values.len() + 1
    );
}

#[test]
fn ansatz_residual_improves_with_correction() {
    let eps_list = [0.2, 0.1, 0.05];
    let mut with = Vec::new();
    let mut without = Vec::new();
    for &eps in &eps_list {
        let mut p = params(2, 0.3);
        p.eps = eps;
        let rho = -0.5 / eps;
        let prof = solve_ac(1.2, rho, &p).unwrap();
        with.push((eps, residual_of_ansatz(1.2, rho, &p, Some(&prof)).unwrap().h1));
        without.push((eps, residual_of_ansatz(1.2, rho, &p, None).unwrap().h1));
    }
    let s1 = log_log_slope(&with).slope;
    let s0 = log_log_slope(&without).slope;
    assert!(s1 >= 1.4, "slope with correction {s1}");
    assert!((s0 - 1.0).abs() < 0.15, "bare slope {s0}");
    assert!(with.iter().zip(&without).all(|(a, b)| a.1 < b.1));
}

#[test]
fn constant_potential_is_an_exact_solution() {
    // small eps pushes the cutoff far enough out that Q_c is below roundoff there
    let p = CorrectionParams::new(exp(2), 0.3, 0.02, Potential::constant(1.0));
    let prof = solve_ac(1.0, 0.0, &p).unwrap();
    let r = residual_of_ansatz(1.0, 0.0, &p, Some(&prof)).unwrap();
    // roundoff in the third spectral derivative, measured in H^1, sits near 1e-8
    assert!(r.h1 < 1e-6, "{}", r.h1);
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(32))]
    #[test]
    fn operator_is_symmetric(a in -2.0f64..2.0, b in -2.0f64..2.0, s1 in 0.5f64..2.0, s2 in 0.5f64..2.0, c in 0.5f64..2.0, m in 2u32..=4) {
        let (y0, h, n) = (-25.0, 0.01, 5001);
        let u: Vec<f64> = (0..n).map(|i| { let y = y0 + i as f64 * h; (-(y - a).powi(2) / s1).exp() }).collect();
        let v: Vec<f64> = (0..n).map(|i| { let y = y0 + i as f64 * h; y * (-(y - b).powi(2) / s2).exp() }).collect();
        let lu = apply_l(&u, y0, h, c, exp(m)).unwrap();
        let lv = apply_l(&v, y0, h, c, exp(m)).unwrap();
        let dot = |x: &[f64], y: &[f64]| x.iter().zip(y).map(|(p, q)| p * q).sum::<f64>() * h;
        let nu = dot(&u, &u).sqrt();
        let nv = dot(&v, &v).sqrt();
        prop_assert!((dot(&lu, &v) - dot(&u, &lv)).abs() < 1e-9 * nu * nv);
    }
}
