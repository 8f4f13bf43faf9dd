//! Dormand-Prince 5(4) embedded Runge-Kutta pair with step-size control.

use crate::error::{Error, Result};

const C2: f64 = 1.0 / 5.0;
const C3: f64 = 3.0 / 10.0;
const C4: f64 = 4.0 / 5.0;
const C5: f64 = 8.0 / 9.0;

const A21: f64 = 1.0 / 5.0;
const A31: f64 = 3.0 / 40.0;
const A32: f64 = 9.0 / 40.0;
const A41: f64 = 44.0 / 45.0;
const A42: f64 = -56.0 / 15.0;
const A43: f64 = 32.0 / 9.0;
const A51: f64 = 19372.0 / 6561.0;
const A52: f64 = -25360.0 / 2187.0;
const A53: f64 = 64448.0 / 6561.0;
const A54: f64 = -212.0 / 729.0;
const A61: f64 = 9017.0 / 3168.0;
const A62: f64 = -355.0 / 33.0;
const A63: f64 = 46732.0 / 5247.0;
const A64: f64 = 49.0 / 176.0;
const A65: f64 = -5103.0 / 18656.0;
const B1: f64 = 35.0 / 384.0;
const B3: f64 = 500.0 / 1113.0;
const B4: f64 = 125.0 / 192.0;
const B5: f64 = -2187.0 / 6784.0;
const B6: f64 = 11.0 / 84.0;
// difference between the 5th and 4th order weights
const E1: f64 = 71.0 / 57600.0;
const E3: f64 = -71.0 / 16695.0;
const E4: f64 = 71.0 / 1920.0;
const E5: f64 = -17253.0 / 339200.0;
const E6: f64 = 22.0 / 525.0;
const E7: f64 = -1.0 / 40.0;

#[derive(Clone, Copy, Debug)]
pub struct Tolerances {
    pub rtol: f64,
    pub atol: f64,
    pub h_min: f64,
    pub h_max: f64,
}

impl Default for Tolerances {
    fn default() -> Self {
        Tolerances {
            rtol: 1e-10,
            atol: 1e-12,
            h_min: 1e-10,
            h_max: f64::INFINITY,
        }
    }
}

#[inline]
fn axpy<const N: usize>(y: &[f64; N], terms: &[(f64, &[f64; N])], h: f64) -> [f64; N] {
    let mut out = *y;
    for (c, k) in terms {
        for i in 0..N {
            out[i] += h * c * k[i];
        }
    }
    out
}

/// One Dormand-Prince step of signed length `h`: returns the 5th order
/// solution and the embedded error estimate (componentwise).
pub fn dopri_step<const N: usize, F>(f: &F, t: f64, y: &[f64; N], h: f64) -> ([f64; N], [f64; N])
where
    F: Fn(f64, &[f64; N]) -> [f64; N],
{
    let k1 = f(t, y);
    let k2 = f(t + C2 * h, &axpy(y, &[(A21, &k1)], h));
    let k3 = f(t + C3 * h, &axpy(y, &[(A31, &k1), (A32, &k2)], h));
    let k4 = f(t + C4 * h, &axpy(y, &[(A41, &k1), (A42, &k2), (A43, &k3)], h));
    let k5 = f(
        t + C5 * h,
        &axpy(y, &[(A51, &k1), (A52, &k2), (A53, &k3), (A54, &k4)], h),
    );
    let k6 = f(
        t + h,
        &axpy(y, &[(A61, &k1), (A62, &k2), (A63, &k3), (A64, &k4), (A65, &k5)], h),
    );
    let y_new = axpy(y, &[(B1, &k1), (B3, &k3), (B4, &k4), (B5, &k5), (B6, &k6)], h);
    let k7 = f(t + h, &y_new);
    let mut err = [0.0; N];
    for i in 0..N {
        err[i] = h * (E1 * k1[i] + E3 * k3[i] + E4 * k4[i] + E5 * k5[i] + E6 * k6[i] + E7 * k7[i]);
    }
    (y_new, err)
}

/// Adaptive integrator that hands out accepted steps one at a time, so callers
/// can run their own event detection between steps.
pub struct Integrator<const N: usize, F> {
    f: F,
    tol: Tolerances,
    t: f64,
    y: [f64; N],
    h: f64,
}

impl<const N: usize, F> Integrator<N, F>
where
    F: Fn(f64, &[f64; N]) -> [f64; N],
{
    /// `h0` is signed: negative values integrate backward in time.
    pub fn new(f: F, t0: f64, y0: [f64; N], h0: f64, tol: Tolerances) -> Self {
        Integrator {
            f,
            tol,
            t: t0,
            y: y0,
            h: h0,
        }
    }

    pub fn t(&self) -> f64 {
        self.t
    }

    pub fn y(&self) -> &[f64; N] {
        &self.y
    }

    pub fn rhs(&self, t: f64, y: &[f64; N]) -> [f64; N] {
        (self.f)(t, y)
    }

    /// Takes exactly one step of signed length `h` from `(t, y)` without error control.
    pub fn fixed_step(&self, t: f64, y: &[f64; N], h: f64) -> [f64; N] {
        dopri_step(&self.f, t, y, h).0
    }

    /// Performs one accepted adaptive step, returning `(t_new, y_new)`.
    pub fn advance(&mut self) -> Result<(f64, [f64; N])> {
        let dir = self.h.signum();
        loop {
            let mut h = self.h;
            if h.abs() > self.tol.h_max {
                h = dir * self.tol.h_max;
            }
            if h.abs() < self.tol.h_min {
                return Err(Error::StepUnderflow { t: self.t, h });
            }
            let (y_new, err) = dopri_step(&self.f, self.t, &self.y, h);
            let mut acc = 0.0;
            for i in 0..N {
                let sc = self.tol.atol + self.tol.rtol * self.y[i].abs().max(y_new[i].abs());
                acc += (err[i] / sc).powi(2);
            }
            let norm = (acc / N as f64).sqrt();
            if !norm.is_finite() {
                self.h = 0.2 * h;
                continue;
            }
            let factor = if norm == 0.0 {
                5.0
            } else {
                (0.9 * norm.powf(-0.2)).clamp(0.2, 5.0)
            };
            if norm <= 1.0 {
                self.t += h;
                self.y = y_new;
                self.h = h * factor;
                return Ok((self.t, self.y));
            }
            self.h = h * factor.min(1.0);
        }
    }

    /// Resets the current point (used after landing exactly on an event).
    pub fn reset(&mut self, t: f64, y: [f64; N]) {
        self.t = t;
        self.y = y;
    }
}
