//! Ground states `Q`, scaled solitons `Q_c(s) = c^{1/(m-1)} Q(c^{1/2} s)` and
//! their integral constants.
//!
//! `Q` is the positive even solution of `Q'' - Q + Q^m = 0`, which for integer
//! `m >= 2` has the closed form
//! `Q(x) = ((m+1)/2)^{1/(m-1)} sech^{2/(m-1)}((m-1)x/2)`.

use crate::error::{Error, Result};
use crate::quadrature::trapezoid_symmetric;

/// Nonlinearity exponent of the gKdV equation, restricted to the subcritical
/// cases 2, 3 and 4.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub struct Exponent(u32);

impl Exponent {
    pub fn new(m: u32) -> Result<Self> {
        match m {
            2..=4 => Ok(Exponent(m)),
            _ => Err(Error::UnsupportedExponent(m)),
        }
    }

    pub fn get(self) -> u32 {
        self.0
    }

    pub fn as_f64(self) -> f64 {
        self.0 as f64
    }

    /// `(5 - m)/(m + 3)`, the speed threshold at which the effective scaling is frozen.
    pub fn lambda0(self) -> f64 {
        (5.0 - self.as_f64()) / (self.as_f64() + 3.0)
    }

    /// `4/(m + 3)`: prefactor of the scaling law and power of `a` in its first integral.
    pub fn scaling_power(self) -> f64 {
        4.0 / (self.as_f64() + 3.0)
    }

    /// `1/(m-1) - 1/4`; `int Q_c^2 = c^{2 theta} int Q^2`.
    pub fn theta(self) -> f64 {
        1.0 / (self.as_f64() - 1.0) - 0.25
    }

    /// Shape factor of a soliton that ends up where `a = 2`.
    pub fn refraction_kappa(self) -> f64 {
        2f64.powf(-1.0 / (self.as_f64() - 1.0))
    }

    pub fn all() -> [Exponent; 3] {
        [Exponent(2), Exponent(3), Exponent(4)]
    }
}

impl TryFrom<u32> for Exponent {
    type Error = Error;
    fn try_from(m: u32) -> Result<Self> {
        Exponent::new(m)
    }
}

impl std::fmt::Display for Exponent {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "{}", self.0)
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct GroundState {
    m: Exponent,
    amplitude: f64,
    /// argument scale `(m-1)/2`
    beta: f64,
    /// sech power `2/(m-1)`
    power: f64,
}

/// `sech(x)^p`, with the integer cases unrolled.
#[inline]
fn sech_pow(x: f64, p: f64, m: u32) -> f64 {
    let s = 1.0 / x.cosh();
    match m {
        2 => s * s,
        3 => s,
        _ => s.powf(p),
    }
}

impl GroundState {
    pub fn new(m: Exponent) -> Self {
        let mf = m.as_f64();
        GroundState {
            m,
            amplitude: ((mf + 1.0) / 2.0).powf(1.0 / (mf - 1.0)),
            beta: (mf - 1.0) / 2.0,
            power: 2.0 / (mf - 1.0),
        }
    }

    pub fn exponent(&self) -> Exponent {
        self.m
    }

    pub fn amplitude(&self) -> f64 {
        self.amplitude
    }

    /// Exponential decay rate of `Q` at infinity.
    pub fn decay_rate(&self) -> f64 {
        1.0
    }

    pub fn value(&self, x: f64) -> f64 {
        self.amplitude * sech_pow(self.beta * x, self.power, self.m.0)
    }

    pub fn derivative(&self, x: f64) -> f64 {
        let bx = self.beta * x;
        -self.amplitude * self.power * self.beta * bx.tanh() * sech_pow(bx, self.power, self.m.0)
    }

    pub fn second_derivative(&self, x: f64) -> f64 {
        let bx = self.beta * x;
        let t = bx.tanh();
        let s = 1.0 / bx.cosh();
        self.amplitude
            * self.power
            * self.beta
            * self.beta
            * sech_pow(bx, self.power, self.m.0)
            * (self.power * t * t - s * s)
    }
}

/// Validates `m` and returns the ground state.
pub fn ground_state(m: u32) -> Result<GroundState> {
    Ok(GroundState::new(Exponent::new(m)?))
}

/// Evaluator for `Q_c(s) = c^{1/(m-1)} Q(c^{1/2} s)`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ScaledSoliton {
    c: f64,
    q: GroundState,
    amp_scale: f64,
    sqrt_c: f64,
}

impl ScaledSoliton {
    pub fn new(c: f64, m: Exponent) -> Result<Self> {
        if !(c > 0.0) || !c.is_finite() {
            return Err(Error::invalid("c", c, "scaling must be positive"));
        }
        Ok(ScaledSoliton {
            c,
            q: GroundState::new(m),
            amp_scale: c.powf(1.0 / (m.as_f64() - 1.0)),
            sqrt_c: c.sqrt(),
        })
    }

    pub fn c(&self) -> f64 {
        self.c
    }

    pub fn exponent(&self) -> Exponent {
        self.q.m
    }

    pub fn ground(&self) -> &GroundState {
        &self.q
    }

    pub fn value(&self, s: f64) -> f64 {
        self.amp_scale * self.q.value(self.sqrt_c * s)
    }

    pub fn derivative(&self, s: f64) -> f64 {
        self.amp_scale * self.sqrt_c * self.q.derivative(self.sqrt_c * s)
    }

    pub fn second_derivative(&self, s: f64) -> f64 {
        self.amp_scale * self.c * self.q.second_derivative(self.sqrt_c * s)
    }

    /// `Lambda Q_c = d/dc Q_c`, differentiated in closed form through the scaling law.
    pub fn lambda_q(&self, s: f64) -> f64 {
        let k = 1.0 / (self.q.m.as_f64() - 1.0);
        let x = self.sqrt_c * s;
        k * self.amp_scale / self.c * self.q.value(x) + self.amp_scale * self.q.derivative(x) * s / (2.0 * self.sqrt_c)
    }

    /// Half-width beyond which `Q_c` is below `1e-17` of its peak.
    pub fn support_half_width(&self) -> f64 {
        40.0 / self.sqrt_c
    }

    /// `int Q_c(s)^k ds` by trapezoid on `|s| <= 40/sqrt(c)`.
    pub fn integrate_power(&self, k: i32) -> f64 {
        let hw = self.support_half_width();
        let n = (2.0 * hw / (0.01 / self.sqrt_c)).ceil() as usize;
        trapezoid_symmetric(|s| self.value(s).powi(k), hw, n)
    }
}

pub fn scaled_soliton(c: f64, m: u32) -> Result<ScaledSoliton> {
    ScaledSoliton::new(c, Exponent::new(m)?)
}

/// Closed-form `Lambda Q_c` evaluator.
pub fn lambda_q(c: f64, m: u32) -> Result<impl Fn(f64) -> f64> {
    let q = scaled_soliton(c, m)?;
    Ok(move |s| q.lambda_q(s))
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SolitonIntegrals {
    /// `int Q_c`
    pub int_q: f64,
    /// `int Q_c^2`
    pub int_q2: f64,
    /// `M[Q_c] = (1/2) int Q_c^2`
    pub mass: f64,
}

pub fn soliton_integrals(c: f64, m: u32) -> Result<SolitonIntegrals> {
    let q = scaled_soliton(c, m)?;
    let int_q = q.integrate_power(1);
    let int_q2 = q.integrate_power(2);
    Ok(SolitonIntegrals {
        int_q,
        int_q2,
        mass: 0.5 * int_q2,
    })
}

/// `xi_m = (3-m)/(5-m)^2 (int Q)^2 / int Q^2`, the coefficient of the first-order
/// position correction.
pub fn xi(m: Exponent) -> f64 {
    let ints = soliton_integrals(1.0, m.get()).expect("c = 1 is valid");
    let mf = m.as_f64();
    (3.0 - mf) / ((5.0 - mf) * (5.0 - mf)) * ints.int_q * ints.int_q / ints.int_q2
}

/// `(int Q)^2 / int Q^2` for the unit soliton.
pub fn shape_ratio(m: Exponent) -> f64 {
    let ints = soliton_integrals(1.0, m.get()).expect("c = 1 is valid");
    ints.int_q * ints.int_q / ints.int_q2
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::{PI, SQRT_2};

    fn residual_max(q: &ScaledSoliton, half: f64, h: f64) -> f64 {
        let m = q.exponent().as_f64();
        let n = (2.0 * half / h) as usize;
        (0..=n)
            .map(|i| {
                let s = -half + i as f64 * h;
                let v = q.value(s);
                (q.second_derivative(s) - q.c() * v + v.powf(m)).abs()
            })
            .fold(0.0, f64::max)
    }

    #[test]
    fn rejects_bad_exponent() {
        assert!(matches!(ground_state(5), Err(Error::UnsupportedExponent(5))));
        assert!(matches!(ground_state(1), Err(Error::UnsupportedExponent(1))));
    }

    #[test]
    fn cubic_ground_state() {
        let q = ground_state(3).unwrap();
        assert!((q.value(0.0) - SQRT_2).abs() < 1e-15);
        for i in -3000..=3000 {
            let x = i as f64 * 0.01;
            let v = q.value(x);
            assert!((v - SQRT_2 / x.cosh()).abs() < 1e-15);
            assert!((q.second_derivative(x) - v + v.powi(3)).abs() < 1e-12);
        }
    }

    #[test]
    fn quadratic_amplitude() {
        let q = ground_state(2).unwrap();
        assert!((q.value(0.0) - 1.5).abs() < 1e-15);
        let s = scaled_soliton(1.0, 2).unwrap();
        assert!(residual_max(&s, 30.0, 0.01) < 1e-12);
    }

    #[test]
    fn even_and_decreasing() {
        for m in 2..=4 {
            let q = ground_state(m).unwrap();
            let mut prev = q.value(0.0);
            for i in 1..2000 {
                let x = i as f64 * 0.01;
                assert_eq!(q.value(x), q.value(-x));
                let v = q.value(x);
                assert!(v < prev && v > 0.0);
                prev = v;
            }
        }
    }

    #[test]
    fn scaled_residual_all_cases() {
        for m in 2..=4 {
            for &c in &[0.1, 0.5, 1.0, 3.0, 10.0] {
                let q = scaled_soliton(c, m).unwrap();
                assert!(residual_max(&q, 30.0, 0.01) < 1e-9, "m={m} c={c}");
            }
        }
    }

    #[test]
    fn unit_scaling_is_ground_state() {
        let q = ground_state(3).unwrap();
        let s = scaled_soliton(1.0, 3).unwrap();
        for i in -100..100 {
            let x = i as f64 * 0.1;
            assert_eq!(q.value(x), s.value(x));
        }
        let s4 = scaled_soliton(4.0, 3).unwrap();
        assert!((s4.value(0.0) - 2.0 * SQRT_2).abs() < 1e-14);
    }

    #[test]
    fn rejects_nonpositive_c() {
        assert!(scaled_soliton(0.0, 2).is_err());
        assert!(scaled_soliton(-1.0, 2).is_err());
        assert!(lambda_q(-1.0, 3).is_err());
    }

    #[test]
    fn lambda_q_matches_finite_differences() {
        let h = 1e-5;
        for m in 2..=4 {
            for &c in &[0.5, 1.0, 2.5] {
                let lq = lambda_q(c, m).unwrap();
                let qp = scaled_soliton(c + h, m).unwrap();
                let qm = scaled_soliton(c - h, m).unwrap();
                for i in -200..=200 {
                    let s = i as f64 * 0.1;
                    let fd = (qp.value(s) - qm.value(s)) / (2.0 * h);
                    assert!((lq(s) - fd).abs() < 1e-8, "m={m} c={c} s={s}");
                }
            }
        }
        let lq = lambda_q(1.0, 3).unwrap();
        assert!((lq(0.0) - SQRT_2 / 2.0).abs() < 1e-15);
    }

    #[test]
    fn integrals_closed_forms() {
        let i3 = soliton_integrals(1.0, 3).unwrap();
        assert!((i3.int_q - SQRT_2 * PI).abs() < 1e-12);
        assert!((i3.int_q2 - 4.0).abs() < 1e-12);
        let i2 = soliton_integrals(1.0, 2).unwrap();
        assert!((i2.int_q - 6.0).abs() < 1e-12);
        assert!((i2.int_q2 - 6.0).abs() < 1e-12);
        assert!((i2.mass - 3.0).abs() < 1e-12);
        assert!((xi(Exponent(2)) - 2.0 / 3.0).abs() < 1e-12);
        assert_eq!(xi(Exponent(3)), 0.0);
    }

    #[test]
    fn integrals_converged_under_refinement() {
        for m in 2..=4 {
            let q = scaled_soliton(1.3, m).unwrap();
            let hw = q.support_half_width();
            let coarse = trapezoid_symmetric(|s| q.value(s).powi(2), hw, 8000);
            let fine = trapezoid_symmetric(|s| q.value(s).powi(2), hw, 16000);
            assert!((coarse - fine).abs() < 1e-10);
        }
    }

    #[test]
    fn mass_homogeneity() {
        let q = scaled_soliton(0.25, 2).unwrap();
        let base = soliton_integrals(1.0, 2).unwrap();
        let lhs = q.integrate_power(2);
        assert!((lhs - 0.25f64.powf(1.5) * base.int_q2).abs() < 1e-12);
    }

    #[test]
    fn lambda_q_pairing_identity() {
        // int Q_c Lambda Q_c = theta c^{2 theta - 1} int Q^2
        for m in Exponent::all() {
            let c = 1.7;
            let q = ScaledSoliton::new(c, m).unwrap();
            let hw = q.support_half_width();
            let lhs = trapezoid_symmetric(|s| q.value(s) * q.lambda_q(s), hw, 20000);
            let th = m.theta();
            let base = soliton_integrals(1.0, m.get()).unwrap().int_q2;
            assert!((lhs - th * c.powf(2.0 * th - 1.0) * base).abs() < 1e-10);
        }
    }
}
