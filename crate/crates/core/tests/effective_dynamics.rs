use gkdv_core::effective::{
    integrate_backward, integrate_forward, refraction_integral, refraction_limit_at_lambda0, solve_c_infinity,
    solve_c_infinity_with, solve_lambda_tilde, solve_lambda_tilde_in, Branch, EffectiveParams, StartRule,
};
use gkdv_core::{make_tanh_potential, Exponent};

fn params(m: u32, lambda: f64, eps: f64, start: StartRule) -> EffectiveParams {
    EffectiveParams::new(m, lambda, eps, make_tanh_potential(1.0).unwrap())
        .unwrap()
        .with_start(start)
}

// Independent oracle: dense scan for the unique sign change of the threshold equation.
#[test]
fn lambda_tilde_matches_dense_scan() {
    for m in Exponent::all() {
        let l0 = m.lambda0();
        let target = 2f64.powf(4.0 / (m.as_f64() + 3.0));
        let n = 1_000_000;
        let mut changes = Vec::new();
        let mut prev = f64::NAN;
        for i in 1..n {
            let l = l0 + (1.0 - l0) * i as f64 / n as f64;
            let v = l * ((1.0 - l0) / (l - l0)).powf(1.0 - l0) - target;
            if prev.is_finite() && prev.signum() != v.signum() {
                changes.push(l);
            }
            prev = v;
        }
        assert_eq!(changes.len(), 1);
        let root = solve_lambda_tilde(m.get()).unwrap();
        assert!((root - changes[0]).abs() < 2.0 / n as f64);
    }
}

#[test]
fn roots_are_bracket_stable() {
    for m in 2..=4 {
        let a = solve_lambda_tilde(m).unwrap();
        let b = solve_lambda_tilde_in(m, 1e-3).unwrap();
        assert!((a - b).abs() < 1e-10);
        for &l in &[0.2, 0.5, 0.9] {
            if let (Ok(x), Ok(y)) = (solve_c_infinity(l, m), solve_c_infinity_with(l, m, 1e-3)) {
                assert!((x.c_inf - y.c_inf).abs() < 1e-10, "m={m} l={l}");
            }
        }
    }
}

#[test]
fn first_integral_is_conserved() {
    for &(m, lambda, eps) in &[(2, 0.3, 0.1), (2, 0.9, 0.2), (3, 0.2, 0.1), (4, 0.5, 0.05)] {
        let tr = integrate_forward(&params(m, lambda, eps, StartRule::TEps)).unwrap();
        assert!(
            tr.first_integral_drift() < 1e-8,
            "{m} {lambda} {eps}: {}",
            tr.first_integral_drift()
        );
        assert!(tr.c_positive_and_monotone());
    }
}

#[test]
fn reflection_has_single_turning_time() {
    let tr = integrate_forward(&params(2, 0.9, 0.1, StartRule::TEps)).unwrap();
    assert_eq!(tr.branch, Branch::Reflection);
    let t0 = tr.turning_time.expect("turning time");
    let (c, _) = tr.state_at(t0);
    assert!((c - 0.9).abs() < 1e-8);
    assert!((tr.last().p - tr.p_start).abs() < 1e-6 * tr.p_start.abs());
}

#[test]
fn terminal_error_shrinks_with_eps() {
    let errs: Vec<f64> = [0.2, 0.1, 0.05]
        .iter()
        .map(|&e| {
            integrate_forward(&params(2, 0.3, e, StartRule::TEps))
                .unwrap()
                .terminal_error()
                .unwrap()
        })
        .collect();
    assert!(errs[0] > errs[1] && errs[1] > errs[2], "{errs:?}");
}

#[test]
fn refraction_identity() {
    for &(m, lambda) in &[(2, 0.3), (3, 0.2), (4, 0.1), (2, 0.8)] {
        let tr = integrate_forward(&params(m, lambda, 0.1, StartRule::Flat)).unwrap();
        let r = refraction_integral(&tr).unwrap();
        assert!(r.relative_gap().unwrap() < 1e-4, "{m} {lambda}: {r:?}");
    }
    let tr = integrate_forward(&params(2, 0.6, 0.05, StartRule::Flat)).unwrap();
    let r = refraction_integral(&tr).unwrap();
    assert!(r.closed_form.is_none());
    let lim = refraction_limit_at_lambda0(Exponent::new(2).unwrap());
    assert!((r.time_domain - lim).abs() < 1e-8 * lim);
}

#[test]
fn backward_run_retraces_forward() {
    let tr = integrate_forward(&params(2, 0.3, 0.1, StartRule::Flat)).unwrap();
    let back = integrate_backward(&tr, tr.last().c, 0.0).unwrap();
    assert!(back.closeness < 1e-7, "{}", back.closeness);
    assert!((back.trajectory.first().c - 1.0).abs() < 1e-8);
    let law = solve_c_infinity(0.3, 2).unwrap();
    let shifted = integrate_backward(&tr, law.c_inf, 0.1f64.powf(-0.51)).unwrap();
    assert!(shifted.constant() < 10.0, "{}", shifted.constant());
}
