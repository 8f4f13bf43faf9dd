//! Linearized operator `L v = -v'' + c v - m Q_c^{m-1} v`, the first-order profile
//! correction `A_c` and the residual of the corrected ansatz.
//!
//! `A_c` solves `(L A_c)' = G - g Q_c'` with
//!
//! ```text
//! G = (4/(m+3)) c (c - lambda/lambda0) Lambda Q_c + (y Q_c^m)' - (c - lambda) Q_c/(m-1),
//! ```
//!
//! decaying as `y -> +inf` and tending to a constant as `y -> -inf`. The scalar `g`
//! is an unknown fixed together with `A_c` by `int Q_c A_c = 0`; the position
//! correction is then `f2 = g a'/a`.

use std::io::Write;

use crate::banded::Banded;
use crate::error::{Error, Result};
use crate::potential::Potential;
use crate::quadrature::{cumulative_gauss, lagrange8};
use crate::soliton::{self, Exponent, ScaledSoliton};
use crate::spectral::{Grid, SpectralOps};

/// `-v'' + c v - m Q_c^{m-1} v` with fourth-order differences on the uniform grid
/// `y_i = y0 + i h` (one-sided stencils in the two outermost points at each end).
pub fn apply_l(v: &[f64], y0: f64, h: f64, c: f64, m: Exponent) -> Result<Vec<f64>> {
    let q = ScaledSoliton::new(c, m)?;
    let n = v.len();
    if n < 6 {
        return Err(Error::invalid("n", n as f64, "need at least 6 samples"));
    }
    let mm = m.as_f64();
    let k = m.get() as i32 - 1;
    let h2 = h * h;
    let d2 = |i: usize| -> f64 {
        if i >= 2 && i + 2 < n {
            (-v[i - 2] + 16.0 * v[i - 1] - 30.0 * v[i] + 16.0 * v[i + 1] - v[i + 2]) / (12.0 * h2)
        } else if i < 2 {
            let b = i;
            let s = [45.0, -154.0, 214.0, -156.0, 61.0, -10.0];
            // shift the one-sided formula to point i = 0 or 1
            if b == 0 {
                (0..6).map(|j| s[j] * v[j]).sum::<f64>() / (12.0 * h2)
            } else {
                (10.0 * v[0] - 15.0 * v[1] - 4.0 * v[2] + 14.0 * v[3] - 6.0 * v[4] + v[5]) / (12.0 * h2)
            }
        } else {
            let s = [45.0, -154.0, 214.0, -156.0, 61.0, -10.0];
            if i == n - 1 {
                (0..6).map(|j| s[j] * v[n - 1 - j]).sum::<f64>() / (12.0 * h2)
            } else {
                (10.0 * v[n - 1] - 15.0 * v[n - 2] - 4.0 * v[n - 3] + 14.0 * v[n - 4] - 6.0 * v[n - 5] + v[n - 6])
                    / (12.0 * h2)
            }
        }
    };
    Ok((0..n)
        .map(|i| {
            let y = y0 + i as f64 * h;
            -d2(i) + c * v[i] - mm * q.value(y).powi(k) * v[i]
        })
        .collect())
}

/// Operator handle bundling `c` and `m`.
#[derive(Clone, Copy, Debug)]
pub struct LinearizedOperator {
    pub c: f64,
    pub m: Exponent,
}

impl LinearizedOperator {
    pub fn new(c: f64, m: Exponent) -> Result<Self> {
        ScaledSoliton::new(c, m)?;
        Ok(LinearizedOperator { c, m })
    }

    pub fn apply(&self, v: &[f64], y0: f64, h: f64) -> Result<Vec<f64>> {
        apply_l(v, y0, h, self.c, self.m)
    }
}

/// Which side the correction decays on.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Direction {
    /// Decays at `+inf`, flat at `-inf` (incoming soliton, forward in time).
    Forward,
}

#[derive(Clone, Debug, PartialEq)]
pub struct CorrectionParams {
    pub m: Exponent,
    pub lambda: f64,
    pub eps: f64,
    pub potential: Potential,
    /// Truncation `Y = y_factor / sqrt(c)`.
    pub y_factor: f64,
    /// Grid spacing of the boundary value problem.
    pub h: f64,
}

impl CorrectionParams {
    pub fn new(m: Exponent, lambda: f64, eps: f64, potential: Potential) -> Self {
        CorrectionParams {
            m,
            lambda,
            eps,
            potential,
            y_factor: 60.0,
            h: 0.01,
        }
    }

    /// `a'/a` at `s = eps rho`.
    pub fn log_derivative(&self, rho: f64) -> f64 {
        let d = self.potential.derivs(self.eps * rho);
        d.d1 / d.a
    }

    /// `d(s) = a'(s) a(s)^{-m/(m-1)}` and `d'(s)`.
    pub fn d_coefficient(&self, s: f64) -> (f64, f64) {
        let d = self.potential.derivs(s);
        let p = self.m.as_f64() / (self.m.as_f64() - 1.0);
        let ap = d.a.powf(-p);
        (d.d1 * ap, d.d2 * ap - p * d.d1 * d.d1 * ap / d.a)
    }

    /// Closed-form `f2` for comparison.
    pub fn f2_closed_form(&self, c: f64, rho: f64) -> f64 {
        let l0 = self.m.lambda0();
        -(soliton::xi(self.m) / c.sqrt()) * (self.lambda - 3.0 * l0 * c) * self.log_derivative(rho)
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct CorrectionProfile {
    pub c: f64,
    pub m: Exponent,
    pub lambda: f64,
    pub y0: f64,
    pub h: f64,
    pub values: Vec<f64>,
    /// `lim_{y -> -inf} A_c`
    pub left_limit: f64,
    /// Coefficient `g` with `f2 = g a'/a`.
    pub g: f64,
    /// `g a'/a (eps rho)`.
    pub recovered_f2: f64,
    /// Residual of the one equation replaced by the pinning condition.
    pub solvability_residual: f64,
}

impl CorrectionProfile {
    pub fn y(&self, i: usize) -> f64 {
        self.y0 + i as f64 * self.h
    }

    pub fn y_max(&self) -> f64 {
        self.y(self.values.len() - 1)
    }

    /// Eight-point Lagrange interpolation; the left limit below the grid, 0 above.
    pub fn value(&self, y: f64) -> f64 {
        if y <= self.y0 {
            return self.left_limit;
        }
        if y >= self.y_max() {
            return 0.0;
        }
        lagrange8(&self.values, self.y0, self.h, y)
    }

    /// Position correction of the time-reversed problem, `f~2 = -f2`.
    pub fn backward_f2(&self) -> f64 {
        -self.recovered_f2
    }

    /// Right limit of the time-reversed profile `A~(y) = -A_c(-y)`.
    pub fn backward_right_limit(&self) -> f64 {
        -self.left_limit
    }

    /// Least-squares slope `gamma` of `log|A_c|` on `[y_lo, y_hi]`, with samples
    /// under `floor` discarded.
    pub fn decay_rate(&self, y_lo: f64, floor: f64) -> f64 {
        let pts: Vec<(f64, f64)> = (0..self.values.len())
            .map(|i| (self.y(i), self.values[i].abs()))
            .filter(|&(y, v)| y >= y_lo && v > floor)
            .map(|(y, v)| (y, v.ln()))
            .collect();
        -crate::fit::linear_fit(&pts).slope
    }

    pub fn write_csv<W: Write>(&self, mut w: W) -> std::io::Result<()> {
        writeln!(w, "# m={} c={} lambda={}", self.m, self.c, self.lambda)?;
        writeln!(w, "# recovered_f2={:.16e}", self.recovered_f2)?;
        writeln!(w, "# g={:.16e} left_limit={:.16e}", self.g, self.left_limit)?;
        writeln!(w, "y,Ac")?;
        for (i, v) in self.values.iter().enumerate() {
            writeln!(w, "{:.10e},{:.16e}", self.y(i), v)?;
        }
        Ok(())
    }
}

/// Solves for `A_c` and `g` on `[-Y, Y]`.
pub fn solve_ac(c: f64, rho: f64, params: &CorrectionParams) -> Result<CorrectionProfile> {
    let m = params.m;
    let q = ScaledSoliton::new(c, m)?;
    if !(0.0..1.0).contains(&params.lambda) {
        return Err(Error::invalid("lambda", params.lambda, "must lie in [0, 1)"));
    }
    let big_y = params.y_factor / c.sqrt();
    let h = params.h;
    let n = (2.0 * big_y / h).round() as usize + 1;
    let y0 = -big_y;
    let y = |i: usize| y0 + i as f64 * h;
    let mf = m.as_f64();
    let lambda = params.lambda;
    let l0 = m.lambda0();
    let pc = m.scaling_power() * c * (c - lambda / l0);

    // tail integrals int_y^inf of Q_c and Lambda Q_c
    let cum_q = cumulative_gauss(|s| q.value(s), y0, h, n);
    let cum_lq = cumulative_gauss(|s| q.lambda_q(s), y0, h, n);
    let (tot_q, tot_lq) = (cum_q[n - 1], cum_lq[n - 1]);
    let mi = m.get() as i32;
    let h0: Vec<f64> = (0..n)
        .map(|i| {
            let yi = y(i);
            yi * q.value(yi).powi(mi) - pc * (tot_lq - cum_lq[i]) + (c - lambda) / (mf - 1.0) * (tot_q - cum_q[i])
        })
        .collect();

    let pin_y = 1.0 / c.sqrt();
    let pin = ((pin_y - y0) / h).round() as usize;
    let mut mat = Banded::zeros(n, 4, 4);
    let st6 = [1.0 / 90.0, -3.0 / 20.0, 1.5, -49.0 / 18.0, 1.5, -3.0 / 20.0, 1.0 / 90.0];
    let st4 = [-1.0 / 12.0, 4.0 / 3.0, -2.5, 4.0 / 3.0, -1.0 / 12.0];
    let st2 = [1.0, -2.0, 1.0];
    let h2 = h * h;
    for i in 1..n - 1 {
        if i == pin {
            continue;
        }
        let (st, half): (&[f64], usize) = if i >= 3 && i + 3 < n {
            (&st6, 3)
        } else if i >= 2 && i + 2 < n {
            (&st4, 2)
        } else {
            (&st2, 1)
        };
        for (k, s) in st.iter().enumerate() {
            mat.add(i, i + k - half, -s / h2);
        }
        let qv = q.value(y(i));
        mat.add(i, i, c - mf * qv.powi(mi - 1));
    }
    mat.set(pin, pin, 1.0);
    let one_sided = [-25.0, 48.0, -36.0, 16.0, -3.0];
    for (k, s) in one_sided.iter().enumerate() {
        mat.set(0, k, s / (12.0 * h));
        mat.set(n - 1, n - 1 - k, -s / (12.0 * h));
    }
    mat.add(n - 1, n - 1, c.sqrt());

    let mut rhs0 = h0.clone();
    let mut rhs1: Vec<f64> = (0..n).map(|i| q.value(y(i))).collect();
    for r in [&mut rhs0, &mut rhs1] {
        r[0] = 0.0;
        r[n - 1] = 0.0;
        r[pin] = 0.0;
    }
    let mut sols = vec![rhs0, rhs1];
    mat.solve(&mut sols)?;
    let (x0, x1) = (&sols[0], &sols[1]);

    let w = |i: usize| if i == 0 || i == n - 1 { 0.5 * h } else { h };
    let dot = |a: &dyn Fn(usize) -> f64, b: &[f64]| (0..n).map(|i| w(i) * a(i) * b[i]).sum::<f64>();
    let qf = |i: usize| q.value(y(i));
    let g = dot(&qf, x0) / dot(&qf, x1);
    let mut a: Vec<f64> = x0.iter().zip(x1).map(|(u, v)| u - g * v).collect();

    // the replaced row: L A + g Q_c - H0 at the pin, using the full stencil
    let solvability_residual = {
        let i = pin;
        let mut s = 0.0;
        for (k, st) in st6.iter().enumerate() {
            s -= st / h2 * a[i + k - 3];
        }
        let qv = q.value(y(i));
        s += (c - mf * qv.powi(mi - 1)) * a[i] + g * qv - h0[i];
        s
    };

    // remove the translation component: int y Q_c A = 0
    let yq = |i: usize| y(i) * q.value(y(i));
    let dq: Vec<f64> = (0..n).map(|i| q.derivative(y(i))).collect();
    let beta = dot(&yq, &a) / dot(&yq, &dq);
    for (ai, d) in a.iter_mut().zip(&dq) {
        *ai -= beta * d;
    }

    let left_limit = a[0];
    let probe = ((0.2 * big_y) / h) as usize;
    let variation = a[..probe.max(2)]
        .iter()
        .map(|v| (v - left_limit).abs())
        .fold(0.0, f64::max);
    if variation > 1e-8 {
        return Err(Error::TruncationTooSmall { variation });
    }
    Ok(CorrectionProfile {
        c,
        m,
        lambda,
        y0,
        h,
        values: a,
        left_limit,
        g,
        recovered_f2: g * params.log_derivative(rho),
        solvability_residual,
    })
}

/// Like [`solve_ac`], but fails when the recovered `f2` differs from the closed form by more than `tol`.
pub fn solve_ac_checked(c: f64, rho: f64, params: &CorrectionParams, tol: f64) -> Result<CorrectionProfile> {
    let p = solve_ac(c, rho, params)?;
    let expected = params.f2_closed_form(c, rho);
    if (p.recovered_f2 - expected).abs() > tol {
        return Err(Error::SolvabilityMismatch {
            recovered: p.recovered_f2,
            expected,
        });
    }
    Ok(p)
}

/// `eta(s)`: smooth, 0 for `s <= -1`, 1 for `s >= 1`, with `0 <= eta' <= 1`.
pub fn cutoff(s: f64) -> f64 {
    let t = 0.5 * (s + 1.0);
    if t <= 0.0 {
        return 0.0;
    }
    if t >= 1.0 {
        return 1.0;
    }
    let f = |x: f64| if x > 0.0 { (-1.0 / x).exp() } else { 0.0 };
    let a = f(t);
    a / (a + f(1.0 - t))
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct AnsatzResidual {
    pub h1: f64,
    pub with_correction: bool,
}

/// `H^1` norm of `S[u~] = u~_t + (u~_xx - lambda u~ + a(eps x) u~^m)_x` for
/// `u~ = eta(eps y + 2) (a~^{-1}(eps rho) Q_c(y) + eps d(eps rho) A_c(y))`, `y = x - rho`,
/// with `c' = eps f1` and `rho' = c - lambda + eps f2`. Passing `None` omits `A_c`
/// (and uses `f2 = 0`).
pub fn residual_of_ansatz(
    c: f64,
    rho: f64,
    params: &CorrectionParams,
    profile: Option<&CorrectionProfile>,
) -> Result<AnsatzResidual> {
    let m = params.m;
    let eps = params.eps;
    let q = ScaledSoliton::new(c, m)?;
    let s = eps * rho;
    let k = 1.0 / (m.as_f64() - 1.0);
    let der = params.potential.derivs(s);
    let alpha = der.a.powf(-k);
    let dalpha = -k * alpha / der.a * der.d1;
    let (d, dd) = params.d_coefficient(s);
    let l0 = m.lambda0();
    let f1 = m.scaling_power() * c * (c - params.lambda / l0) * der.d1 / der.a;

    // d A_c / d c by central differences of two more solves
    let dc_profiles = match profile {
        Some(_) => {
            let dc = 1e-4 * c;
            Some((solve_ac(c + dc, rho, params)?, solve_ac(c - dc, rho, params)?, dc))
        }
        None => None,
    };
    let f2 = profile.map(|p| p.recovered_f2).unwrap_or(0.0);

    let y_left = -3.0 / eps - 10.0;
    let y_right = 40.0 / c.sqrt() + 20.0;
    let grid = Grid::with_spacing(y_right - y_left, 0.04)?;
    let shift = 0.5 * (y_left + y_right);
    let ops = SpectralOps::new(grid);
    let n = grid.n();
    let ys: Vec<f64> = (0..n).map(|j| grid.x(j) + shift).collect();
    let mut u = vec![0.0; n];
    let mut u_c = vec![0.0; n];
    let mut extra = vec![0.0; n];
    for (j, &y) in ys.iter().enumerate() {
        let eta = cutoff(eps * y + 2.0);
        let (av, adc) = match (profile, &dc_profiles) {
            (Some(p), Some((pp, pm, dc))) => (p.value(y), (pp.value(y) - pm.value(y)) / (2.0 * dc)),
            _ => (0.0, 0.0),
        };
        u[j] = eta * (alpha * q.value(y) + eps * d * av);
        u_c[j] = eta * (alpha * q.lambda_q(y) + eps * d * adc);
        extra[j] = eta * (eps * dalpha * q.value(y) + eps * eps * dd * av);
    }
    let ux = ops.derivative(&u);
    let uxxx = ops.derivative_n(&u, 3);
    let mi = m.get() as i32;
    let nl: Vec<f64> = (0..n)
        .map(|j| params.potential.a(eps * (rho + ys[j])) * u[j].powi(mi))
        .collect();
    let nlx = ops.derivative(&nl);
    let speed = c - params.lambda + eps * f2;
    let res: Vec<f64> = (0..n)
        .map(|j| {
            let u_rho = -ux[j] + extra[j];
            let u_t = eps * f1 * u_c[j] + speed * u_rho;
            u_t + uxxx[j] - params.lambda * ux[j] + nlx[j]
        })
        .collect();
    Ok(AnsatzResidual {
        h1: ops.h1_norm(&res),
        with_correction: profile.is_some(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::potential::make_tanh_potential;

    fn grid(c: f64) -> (f64, f64, usize) {
        let y0 = -30.0 / c.sqrt();
        let h = 0.0025;
        (y0, h, (60.0 / c.sqrt() / h) as usize + 1)
    }

    #[test]
    fn operator_identities() {
        for m in Exponent::all() {
            let c = 1.3;
            let q = ScaledSoliton::new(c, m).unwrap();
            let (y0, h, n) = grid(c);
            let ys: Vec<f64> = (0..n).map(|i| y0 + i as f64 * h).collect();
            let dq: Vec<f64> = ys.iter().map(|&y| q.derivative(y)).collect();
            let lq: Vec<f64> = ys.iter().map(|&y| q.lambda_q(y)).collect();
            let qv: Vec<f64> = ys.iter().map(|&y| q.value(y)).collect();
            let r1 = apply_l(&dq, y0, h, c, m).unwrap();
            assert!(r1.iter().all(|v| v.abs() < 1e-8));
            let r2 = apply_l(&lq, y0, h, c, m).unwrap();
            assert!(r2.iter().zip(&qv).all(|(a, b)| (a + b).abs() < 1e-8));
            let r3 = apply_l(&qv, y0, h, c, m).unwrap();
            let mf = m.as_f64();
            assert!(r3
                .iter()
                .zip(&qv)
                .all(|(a, b)| (a - (1.0 - mf) * b.powi(m.get() as i32)).abs() < 1e-8));
        }
    }

    #[test]
    fn one_sided_stencils_are_exact_on_quartics() {
        let m = Exponent::new(2).unwrap();
        let (y0, h) = (-3.0, 0.1);
        let v: Vec<f64> = (0..20).map(|i| (y0 + i as f64 * h).powi(4)).collect();
        // with c = 1 the potential term is O(Q) tiny at |y| >= 1 only, so compare -v'' + v - 2Qv
        let q = ScaledSoliton::new(1.0, m).unwrap();
        let r = apply_l(&v, y0, h, 1.0, m).unwrap();
        for (i, ri) in r.iter().enumerate() {
            let y = y0 + i as f64 * h;
            let exact = -12.0 * y * y + v[i] - 2.0 * q.value(y) * v[i];
            assert!((ri - exact).abs() < 1e-9, "{i}: {ri} vs {exact}");
        }
    }

    #[test]
    fn cutoff_shape() {
        assert_eq!(cutoff(-1.5), 0.0);
        assert_eq!(cutoff(1.2), 1.0);
        assert!((cutoff(0.0) - 0.5).abs() < 1e-15);
        let h = 1e-4;
        let max_slope = (0..20000)
            .map(|i| {
                let s = -1.0 + i as f64 * h;
                (cutoff(s + h) - cutoff(s)) / h
            })
            .fold(0.0, f64::max);
        assert!(max_slope <= 1.0 + 1e-6);
    }

    #[test]
    fn quadratic_case_matches_closed_form() {
        let p = CorrectionParams::new(Exponent::new(2).unwrap(), 0.3, 0.1, make_tanh_potential(1.0).unwrap());
        let prof = solve_ac(1.0, 0.0, &p).unwrap();
        let expected = -(2.0 / 3.0) * (0.3 - 1.8) * (0.5 / 1.5);
        assert!(
            (prof.recovered_f2 - expected).abs() < 1e-6,
            "{} vs {expected}",
            prof.recovered_f2
        );
    }
}
