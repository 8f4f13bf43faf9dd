//! Extraction of the scaling `c(t)` and centre `rho(t)` from a field by the
//! orthogonality conditions `int z Q_c = int z y Q_c = 0`, where
//! `z = u - a~^{-1}(eps rho) Q_c(x - rho)`, and the post-interaction defect.

use std::io::Write;

use crate::effective::EffectiveTrajectory;
use crate::error::{Error, Result};
use crate::potential::Potential;
use crate::soliton::{Exponent, ScaledSoliton};
use crate::spectral::{FieldState, Grid, SpectralOps};

/// Model parameters the ansatz depends on.
#[derive(Clone, Debug, PartialEq)]
pub struct Ansatz {
    pub m: Exponent,
    pub eps: f64,
    pub potential: Potential,
}

impl Ansatz {
    pub fn new(m: Exponent, eps: f64, potential: Potential) -> Self {
        Ansatz { m, eps, potential }
    }

    /// `a~^{-1}(s) = a(s)^{-1/(m-1)}` and its derivative in `s`.
    pub fn amplitude(&self, s: f64) -> (f64, f64) {
        let k = 1.0 / (self.m.as_f64() - 1.0);
        let d = self.potential.derivs(s);
        let v = d.a.powf(-k);
        (v, -k * v / d.a * d.d1)
    }

    /// `R(x) = a~^{-1}(eps rho) Q_c(x - rho)` sampled on `grid` (minimal-image `y`).
    pub fn profile(&self, grid: &Grid, c: f64, rho: f64) -> Result<Vec<f64>> {
        let q = ScaledSoliton::new(c, self.m)?;
        let (alpha, _) = self.amplitude(self.eps * rho);
        Ok((0..grid.n())
            .map(|j| alpha * q.value(grid.periodic_offset(grid.x(j), rho)))
            .collect())
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct Decomposition {
    pub c: f64,
    pub rho: f64,
    pub z: Vec<f64>,
    /// `(int z Q_c, int z y Q_c)`
    pub ortho_residuals: (f64, f64),
    pub iterations: usize,
}

pub const NEWTON_MAX_ITER: usize = 50;

/// Newton iteration on the two orthogonality conditions, starting from `guess = (c, rho)`.
pub fn decompose(u: &FieldState, ansatz: &Ansatz, guess: (f64, f64)) -> Result<Decomposition> {
    let grid = &u.grid;
    let dx = grid.dx();
    let (mut c, mut rho) = guess;
    if !(c > 0.0) {
        return Err(Error::NegativeScaling { c });
    }
    let mut last_step = f64::INFINITY;
    for it in 0..NEWTON_MAX_ITER {
        let q = ScaledSoliton::new(c, ansatz.m)?;
        let (alpha, dalpha) = ansatz.amplitude(ansatz.eps * rho);
        let dalpha = ansatz.eps * dalpha;
        let hw = q.support_half_width();
        let mut f = [0.0; 2];
        let mut jac = [[0.0; 2]; 2];
        for j in 0..grid.n() {
            let y = grid.periodic_offset(grid.x(j), rho);
            if y.abs() > hw {
                continue;
            }
            let qv = q.value(y);
            let qd = q.derivative(y);
            let lq = q.lambda_q(y);
            let z = u.values[j] - alpha * qv;
            f[0] += z * qv;
            f[1] += z * y * qv;
            // d/dc
            jac[0][0] += -alpha * lq * qv + z * lq;
            jac[1][0] += -alpha * lq * y * qv + z * y * lq;
            // d/drho, with dz/drho = -alpha' Q_c + alpha Q_c'
            let dz = -dalpha * qv + alpha * qd;
            jac[0][1] += dz * qv - z * qd;
            jac[1][1] += dz * y * qv + z * (-qv - y * qd);
        }
        let det = jac[0][0] * jac[1][1] - jac[0][1] * jac[1][0];
        if det == 0.0 || !det.is_finite() {
            return Err(Error::NewtonNonConvergence {
                iterations: it,
                last_step,
            });
        }
        let (f0, f1) = (f[0] * dx, f[1] * dx);
        let (j00, j01, j10, j11) = (jac[0][0] * dx, jac[0][1] * dx, jac[1][0] * dx, jac[1][1] * dx);
        let det = j00 * j11 - j01 * j10;
        let dc = -(j11 * f0 - j01 * f1) / det;
        let drho = -(-j10 * f0 + j00 * f1) / det;
        c += dc;
        rho += drho;
        if !(c > 0.0) {
            return Err(Error::NegativeScaling { c });
        }
        last_step = (dc / c).abs().max(drho.abs() * c.sqrt());
        if last_step < 1e-12 {
            return finish(u, ansatz, c, rho, it + 1);
        }
    }
    Err(Error::NewtonNonConvergence {
        iterations: NEWTON_MAX_ITER,
        last_step,
    })
}

fn finish(u: &FieldState, ansatz: &Ansatz, c: f64, rho: f64, iterations: usize) -> Result<Decomposition> {
    let grid = &u.grid;
    let r = ansatz.profile(grid, c, rho)?;
    let q = ScaledSoliton::new(c, ansatz.m)?;
    let z: Vec<f64> = u.values.iter().zip(&r).map(|(a, b)| a - b).collect();
    let mut o = (0.0, 0.0);
    for (j, zj) in z.iter().enumerate() {
        let y = grid.periodic_offset(grid.x(j), rho);
        let qv = q.value(y);
        o.0 += zj * qv;
        o.1 += zj * y * qv;
    }
    let dx = grid.dx();
    Ok(Decomposition {
        c,
        rho,
        z,
        ortho_residuals: (o.0 * dx, o.1 * dx),
        iterations,
    })
}

/// One tracked instant.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct TrackSample {
    pub t: f64,
    pub c: f64,
    pub rho: f64,
    pub z_h1: f64,
    /// `H^1` norm of `z` weighted by `e^{-|y|/A_0}`.
    pub z_h1_local: f64,
}

/// Warm-started decomposition of a time-ordered sequence of fields.
pub struct Tracker {
    ansatz: Ansatz,
    lambda: f64,
    weight_scale: f64,
    ops: Option<SpectralOps>,
    samples: Vec<TrackSample>,
}

impl Tracker {
    pub fn new(ansatz: Ansatz, lambda: f64, c0: f64, rho0: f64, t0: f64) -> Self {
        Tracker {
            ansatz,
            lambda,
            weight_scale: 10.0,
            ops: None,
            samples: vec![TrackSample {
                t: t0,
                c: c0,
                rho: rho0,
                z_h1: f64::NAN,
                z_h1_local: f64::NAN,
            }],
        }
    }

    pub fn with_weight_scale(mut self, a0: f64) -> Self {
        self.weight_scale = a0;
        self
    }

    fn guess(&self, t: f64) -> (f64, f64) {
        let s = self.samples.last().unwrap();
        let speed = match self.samples.len() {
            0 | 1 => s.c - self.lambda,
            k => {
                let p = &self.samples[k - 2];
                if s.t > p.t {
                    (s.rho - p.rho) / (s.t - p.t)
                } else {
                    s.c - self.lambda
                }
            }
        };
        (s.c, s.rho + speed * (t - s.t))
    }

    /// Decomposes `u` warm-started from the previous sample.
    pub fn push(&mut self, u: &FieldState) -> Result<(TrackSample, Decomposition)> {
        let guess = self.guess(u.t);
        let d = decompose(u, &self.ansatz, guess).map_err(|e| Error::TrackFailure {
            t: u.t,
            source: Box::new(e),
        })?;
        let grid = u.grid;
        if self.ops.as_ref().map(|o| *o.grid() != grid).unwrap_or(true) {
            self.ops = Some(SpectralOps::new(grid));
        }
        let ops = self.ops.as_ref().unwrap();
        let dz = ops.derivative(&d.z);
        let mut full = 0.0;
        let mut local = 0.0;
        for j in 0..grid.n() {
            let e = d.z[j] * d.z[j] + dz[j] * dz[j];
            let y = grid.periodic_offset(grid.x(j), d.rho);
            full += e;
            local += e * (-y.abs() / self.weight_scale).exp();
        }
        let s = TrackSample {
            t: u.t,
            c: d.c,
            rho: d.rho,
            z_h1: (full * grid.dx()).sqrt(),
            z_h1_local: (local * grid.dx()).sqrt(),
        };
        if self.samples.len() == 1 && self.samples[0].z_h1.is_nan() {
            self.samples.clear();
        }
        self.samples.push(s);
        Ok((s, d))
    }

    pub fn samples(&self) -> &[TrackSample] {
        &self.samples
    }

    pub fn into_track(self) -> ModulationTrack {
        ModulationTrack { samples: self.samples }
    }
}

#[derive(Clone, Debug, Default, PartialEq)]
pub struct ModulationTrack {
    pub samples: Vec<TrackSample>,
}

impl ModulationTrack {
    /// `sup_t |c(t) - C(t)|` over samples inside the trajectory's time span.
    pub fn sup_scaling_gap(&self, traj: &EffectiveTrajectory) -> f64 {
        self.samples
            .iter()
            .filter(|s| s.t >= traj.t_start && s.t <= traj.escape_time)
            .map(|s| (s.c - traj.state_at(s.t).0).abs())
            .fold(0.0, f64::max)
    }

    /// `sup |c - C| + |rho - P|` over samples before `t_end` (closeness of the
    /// incoming soliton to the effective prediction).
    pub fn early_closeness(&self, traj: &EffectiveTrajectory, t_end: f64) -> f64 {
        self.samples
            .iter()
            .filter(|s| s.t <= t_end)
            .map(|s| {
                let (c, p) = traj.state_at(s.t);
                (s.c - c).abs() + (s.rho - p).abs()
            })
            .fold(0.0, f64::max)
    }

    /// Centred finite-difference velocity `rho'(t)` at interior samples.
    pub fn velocities(&self) -> Vec<(f64, f64)> {
        self.samples
            .windows(3)
            .map(|w| (w[1].t, (w[2].rho - w[0].rho) / (w[2].t - w[0].t)))
            .collect()
    }
}

/// Post-interaction inelasticity measurement.
#[derive(Clone, Debug, PartialEq)]
pub struct DefectReport {
    pub c_plus: f64,
    pub kappa: f64,
    /// `(t, ||u - kappa Q_{c+}(. - rho(t))||_{H^1}, c(t), rho(t))`
    pub samples: Vec<(f64, f64, f64, f64)>,
    pub liminf_estimate: f64,
    pub window: (f64, f64),
    pub c_inf: Option<f64>,
}

impl DefectReport {
    pub fn c_plus_gap(&self) -> Option<f64> {
        self.c_inf.map(|c| (self.c_plus - c).abs())
    }

    pub fn write_csv<W: Write>(&self, mut w: W) -> std::io::Result<()> {
        writeln!(w, "t,defect_h1,c,rho")?;
        for (t, d, c, r) in &self.samples {
            writeln!(w, "{t:.10e},{d:.10e},{c:.16e},{r:.16e}")?;
        }
        writeln!(
            w,
            "# summary,c_plus={:.16e},kappa={:.16e},liminf={:.10e},window={:.6e}..{:.6e}",
            self.c_plus, self.kappa, self.liminf_estimate, self.window.0, self.window.1
        )
    }
}

fn median(v: &mut [f64]) -> f64 {
    v.sort_by(|a, b| a.total_cmp(b));
    let n = v.len();
    if n % 2 == 1 {
        v[n / 2]
    } else {
        0.5 * (v[n / 2 - 1] + v[n / 2])
    }
}

/// Defect against the best terminal soliton: `c+` is the median of the decomposed
/// scalings over the window, the liminf estimate is the window minimum.
/// `window` holds `(field, c(t), rho(t))` for each sample.
pub fn measure_defect(
    window: &[(FieldState, f64, f64)],
    m: Exponent,
    kappa: f64,
    c_inf: Option<f64>,
    min_length: f64,
) -> Result<DefectReport> {
    let (t0, t1) = match (window.first(), window.last()) {
        (Some(a), Some(b)) => (a.0.t, b.0.t),
        _ => {
            return Err(Error::WindowTooShort {
                length: 0.0,
                required: min_length,
            })
        }
    };
    if t1 - t0 < min_length {
        return Err(Error::WindowTooShort {
            length: t1 - t0,
            required: min_length,
        });
    }
    let mut cs: Vec<f64> = window.iter().map(|w| w.1).collect();
    let c_plus = median(&mut cs);
    let q = ScaledSoliton::new(c_plus, m)?;
    let grid = window[0].0.grid;
    let ops = SpectralOps::new(grid);
    let mut samples = Vec::with_capacity(window.len());
    for (u, c, rho) in window {
        let w: Vec<f64> = (0..grid.n())
            .map(|j| u.values[j] - kappa * q.value(grid.periodic_offset(grid.x(j), *rho)))
            .collect();
        samples.push((u.t, ops.h1_norm(&w), *c, *rho));
    }
    let liminf_estimate = samples.iter().map(|s| s.1).fold(f64::INFINITY, f64::min);
    Ok(DefectReport {
        c_plus,
        kappa,
        samples,
        liminf_estimate,
        window: (t0, t1),
        c_inf,
    })
}

/// Largest `|u|` within `width` of either end of the box.
pub fn edge_amplitude(u: &FieldState, width: f64) -> f64 {
    let g = &u.grid;
    (0..g.n())
        .filter(|&j| {
            let x = g.x(j);
            x - g.x_min() < width || g.x_min() + g.length() - x < width
        })
        .map(|j| u.values[j].abs())
        .fold(0.0, f64::max)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::potential::make_tanh_potential;

    fn setup() -> (Grid, Ansatz) {
        let g = Grid::new(2048, 160.0).unwrap();
        let a = Ansatz::new(Exponent::new(2).unwrap(), 0.1, make_tanh_potential(1.0).unwrap());
        (g, a)
    }

    #[test]
    fn exact_ansatz_is_recovered() {
        let (g, a) = setup();
        let r = a.profile(&g, 1.3, 4.2).unwrap();
        let u = FieldState::new(0.0, g, r).unwrap();
        let d = decompose(&u, &a, (1.1, 5.0)).unwrap();
        assert!((d.c - 1.3).abs() < 1e-11);
        assert!((d.rho - 4.2).abs() < 1e-11);
        assert!(d.z.iter().all(|v| v.abs() < 1e-10));
    }

    #[test]
    fn translation_perturbation_is_absorbed() {
        let (g, a) = setup();
        let q = ScaledSoliton::new(1.0, a.m).unwrap();
        let (alpha, _) = a.amplitude(0.0);
        let u = FieldState::from_fn(0.0, g, |x| alpha * q.value(x) + 0.01 * q.derivative(x));
        let d = decompose(&u, &a, (1.0, 0.0)).unwrap();
        let norm = q.integrate_power(2);
        assert!(d.ortho_residuals.0.abs() < 1e-10 * norm);
        assert!(d.ortho_residuals.1.abs() < 1e-10 * norm);
        assert!(d.rho < 0.0, "shift direction {}", d.rho);
    }

    #[test]
    fn far_guess_fails_cleanly() {
        let (g, a) = setup();
        let u = FieldState::zeros(0.0, g);
        assert!(decompose(&u, &a, (1.0, 0.0)).is_err());
    }
}
