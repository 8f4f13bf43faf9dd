//! Pseudo-spectral solver for
//!
//! ```text
//! u_t + (u_xx - lambda u + a(eps x) u^m)_x = 0
//! ```
//!
//! on a periodic box `[-L/2, L/2)`. The dispersive part is integrated exactly in
//! Fourier space; the nonlinear flux is evaluated pointwise and projected onto the
//! retained band before differentiation, so the grid energy is an exact invariant
//! of the semi-discrete system.

use std::fs;
use std::io::Write;
use std::path::Path;
use std::sync::Arc;

use num_complex::Complex64;
use rustfft::{Fft, FftPlanner};

use crate::error::{Error, Result};
use crate::potential::{Potential, Profile};
use crate::soliton::Exponent;

/// Uniform periodic grid `x_j = -L/2 + j L/N`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Grid {
    n: usize,
    length: f64,
}

impl Grid {
    pub fn new(n: usize, length: f64) -> Result<Self> {
        if n < 256 || !n.is_power_of_two() {
            return Err(Error::invalid("N", n as f64, "must be a power of two >= 256"));
        }
        if !(length > 0.0) || !length.is_finite() {
            return Err(Error::invalid("L", length, "domain length must be positive"));
        }
        Ok(Grid { n, length })
    }

    /// Smallest power-of-two grid on `[-L/2, L/2)` with spacing at most `dx_max`.
    pub fn with_spacing(length: f64, dx_max: f64) -> Result<Self> {
        let n = ((length / dx_max).ceil() as usize).next_power_of_two().max(256);
        Grid::new(n, length)
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn length(&self) -> f64 {
        self.length
    }

    pub fn dx(&self) -> f64 {
        self.length / self.n as f64
    }

    pub fn x_min(&self) -> f64 {
        -0.5 * self.length
    }

    pub fn x(&self, j: usize) -> f64 {
        self.x_min() + j as f64 * self.dx()
    }

    pub fn points(&self) -> Vec<f64> {
        (0..self.n).map(|j| self.x(j)).collect()
    }

    /// Signed mode index of FFT slot `j`, in `[-N/2, N/2)`.
    pub fn mode(&self, j: usize) -> i64 {
        let n = self.n as i64;
        let j = j as i64;
        if j < n / 2 {
            j
        } else {
            j - n
        }
    }

    /// Wavenumbers `2 pi j / L` in FFT order.
    pub fn wavenumbers(&self) -> Vec<f64> {
        let k0 = 2.0 * std::f64::consts::PI / self.length;
        (0..self.n).map(|j| k0 * self.mode(j) as f64).collect()
    }

    /// Shortest distance between `x` and `y` on the circle.
    pub fn periodic_offset(&self, x: f64, y: f64) -> f64 {
        let d = x - y;
        d - self.length * (d / self.length).round()
    }

    /// Wrap a point into `[-L/2, L/2)`.
    pub fn wrap(&self, x: f64) -> f64 {
        let l = self.length;
        (x - self.x_min()).rem_euclid(l) + self.x_min()
    }
}

/// Field samples `u(t, x_j)`.
#[derive(Clone, Debug, PartialEq)]
pub struct FieldState {
    pub t: f64,
    pub grid: Grid,
    pub values: Vec<f64>,
}

impl FieldState {
    pub fn new(t: f64, grid: Grid, values: Vec<f64>) -> Result<Self> {
        if values.len() != grid.n() {
            return Err(Error::LengthMismatch {
                expected: grid.n(),
                found: values.len(),
            });
        }
        Ok(FieldState { t, grid, values })
    }

    pub fn from_fn<F: Fn(f64) -> f64>(t: f64, grid: Grid, f: F) -> Self {
        let values = (0..grid.n()).map(|j| f(grid.x(j))).collect();
        FieldState { t, grid, values }
    }

    pub fn zeros(t: f64, grid: Grid) -> Self {
        FieldState {
            t,
            grid,
            values: vec![0.0; grid.n()],
        }
    }

    /// `v(x) = u(-x)`, exact on the symmetric grid (`x_{N-j} = -x_j`).
    pub fn reflected(&self) -> FieldState {
        let n = self.grid.n();
        let values = (0..n).map(|j| self.values[(n - j) % n]).collect();
        FieldState {
            t: self.t,
            grid: self.grid,
            values,
        }
    }

    pub fn difference(&self, other: &FieldState) -> Result<Vec<f64>> {
        if self.grid != other.grid {
            return Err(Error::LengthMismatch {
                expected: self.grid.n(),
                found: other.grid.n(),
            });
        }
        Ok(self.values.iter().zip(&other.values).map(|(a, b)| a - b).collect())
    }

    pub fn is_finite(&self) -> bool {
        self.values.iter().all(|v| v.is_finite())
    }
}

/// Time-stepping scheme for the stiff linear part.
#[derive(Clone, Copy, Debug, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
pub enum Scheme {
    /// Exponential time differencing RK4 with contour-integral coefficients.
    #[serde(rename = "etdrk4")]
    Etdrk4,
    /// Classical RK4 in the integrating-factor variable `e^{-i(k^3 + lambda k)t} u^`.
    #[serde(rename = "ifrk4")]
    IntegratingFactor,
}

/// Linear damping `-sigma(x) u` near the left edge of the box, where the
/// left-moving radiation leaves (and would re-enter through the seam).
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Sponge {
    pub width: f64,
    pub strength: f64,
}

impl Sponge {
    pub fn sigma(&self, grid: &Grid, x: f64) -> f64 {
        let s = 1.0 - (x - grid.x_min()) / self.width;
        if s <= 0.0 {
            return 0.0;
        }
        let s = s.min(1.0);
        self.strength * s * s * s * (10.0 - 15.0 * s + 6.0 * s * s)
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct StepperConfig {
    pub dt: f64,
    /// Fraction of the Nyquist index kept by the projection (2/3 by default).
    pub dealias: f64,
    pub lambda: f64,
    pub eps: f64,
    pub m: Exponent,
    pub potential: Potential,
    pub scheme: Scheme,
    pub sponge: Option<Sponge>,
    /// Alarm when the top third of the retained band holds more than this
    /// fraction of the spectral energy.
    pub alias_threshold: f64,
    /// Run the aliasing check every this many steps (0 disables it).
    pub alias_check_every: usize,
}

impl StepperConfig {
    pub fn new(m: Exponent, lambda: f64, eps: f64, potential: Potential, dt: f64) -> Self {
        StepperConfig {
            dt,
            dealias: 2.0 / 3.0,
            lambda,
            eps,
            m,
            potential,
            scheme: Scheme::Etdrk4,
            sponge: None,
            alias_threshold: 1e-8,
            alias_check_every: 100,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.dt > 0.0) || !self.dt.is_finite() {
            return Err(Error::invalid("dt", self.dt, "time step must be positive"));
        }
        if !(self.dealias > 0.0 && self.dealias <= 1.0) {
            return Err(Error::invalid("dealias", self.dealias, "must lie in (0, 1]"));
        }
        if !self.lambda.is_finite() || !self.eps.is_finite() || self.eps < 0.0 {
            return Err(Error::invalid("eps", self.eps, "must be finite and non-negative"));
        }
        Ok(())
    }

    /// `gamma` of a tanh potential, 0 otherwise (recorded in snapshots).
    pub fn potential_gamma(&self) -> f64 {
        match self.potential.profile() {
            Profile::Tanh { gamma } => gamma,
            _ => 0.0,
        }
    }

    /// Largest retained mode index.
    pub fn cutoff(&self, grid: &Grid) -> usize {
        (((grid.n() / 2) as f64 * self.dealias).floor() as usize).min(grid.n() / 2 - 1)
    }
}

/// FFT plans and scratch for spectral differentiation on one grid.
#[derive(Clone)]
pub struct SpectralOps {
    grid: Grid,
    k: Vec<f64>,
    forward: Arc<dyn Fft<f64>>,
    inverse: Arc<dyn Fft<f64>>,
}

impl SpectralOps {
    pub fn new(grid: Grid) -> Self {
        let mut planner = FftPlanner::new();
        SpectralOps {
            grid,
            k: grid.wavenumbers(),
            forward: planner.plan_fft_forward(grid.n()),
            inverse: planner.plan_fft_inverse(grid.n()),
        }
    }

    pub fn grid(&self) -> &Grid {
        &self.grid
    }

    pub fn forward(&self, values: &[f64]) -> Vec<Complex64> {
        let mut buf: Vec<Complex64> = values.iter().map(|&v| Complex64::new(v, 0.0)).collect();
        self.forward.process(&mut buf);
        buf
    }

    /// Inverse transform, normalised, returning the real part.
    pub fn inverse_real(&self, spec: &[Complex64]) -> Vec<f64> {
        let mut buf = spec.to_vec();
        self.inverse.process(&mut buf);
        let s = 1.0 / self.grid.n() as f64;
        buf.iter().map(|z| z.re * s).collect()
    }

    /// `d^order/dx^order` by multiplication with `(ik)^order`; the Nyquist mode is dropped.
    pub fn derivative_n(&self, values: &[f64], order: u32) -> Vec<f64> {
        let mut spec = self.forward(values);
        let nyq = self.grid.n() / 2;
        for (j, z) in spec.iter_mut().enumerate() {
            if j == nyq {
                *z = Complex64::new(0.0, 0.0);
                continue;
            }
            *z *= Complex64::new(0.0, self.k[j]).powu(order);
        }
        self.inverse_real(&spec)
    }

    pub fn derivative(&self, values: &[f64]) -> Vec<f64> {
        self.derivative_n(values, 1)
    }

    pub fn h1_norm(&self, w: &[f64]) -> f64 {
        let dw = self.derivative(w);
        let dx = self.grid.dx();
        let s: f64 = w.iter().zip(&dw).map(|(a, b)| a * a + b * b).sum();
        (s * dx).sqrt()
    }
}

/// `(int w^2 + int w_x^2)^{1/2}` with spectral derivative.
pub fn h1_norm(grid: &Grid, w: &[f64]) -> f64 {
    SpectralOps::new(*grid).h1_norm(w)
}

/// `E_a = 1/2 int u_x^2 + lambda/2 int u^2 - 1/(m+1) int a(eps x) u^{m+1}`.
pub fn energy(state: &FieldState, cfg: &StepperConfig) -> f64 {
    energy_with(&SpectralOps::new(state.grid), state, cfg)
}

pub fn energy_with(ops: &SpectralOps, state: &FieldState, cfg: &StepperConfig) -> f64 {
    let grid = &state.grid;
    let du = ops.derivative(&state.values);
    let mp1 = cfg.m.get() as i32 + 1;
    let mut s = 0.0;
    for (j, (&u, &d)) in state.values.iter().zip(&du).enumerate() {
        let a = cfg.potential.a(cfg.eps * grid.x(j));
        s += 0.5 * d * d + 0.5 * cfg.lambda * u * u - a * u.powi(mp1) / mp1 as f64;
    }
    s * grid.dx()
}

/// `M = 1/2 int u^2` and the right side `-(eps/(m+1)) int a'(eps x) u^{m+1}` of its law.
pub fn mass_and_flux(state: &FieldState, cfg: &StepperConfig) -> (f64, f64) {
    let grid = &state.grid;
    let mp1 = cfg.m.get() as i32 + 1;
    let mut mass = 0.0;
    let mut flux = 0.0;
    for (j, &u) in state.values.iter().enumerate() {
        mass += 0.5 * u * u;
        flux += cfg.potential.a_prime(cfg.eps * grid.x(j)) * u.powi(mp1);
    }
    let dx = grid.dx();
    (mass * dx, -cfg.eps / mp1 as f64 * flux * dx)
}

struct Etd {
    e: Vec<Complex64>,
    e2: Vec<Complex64>,
    q: Vec<Complex64>,
    f1: Vec<Complex64>,
    f2: Vec<Complex64>,
    f3: Vec<Complex64>,
}

impl Etd {
    fn new(lin: &[Complex64], h: f64) -> Self {
        const M: usize = 32;
        let roots: Vec<Complex64> = (0..M)
            .map(|j| {
                let th = std::f64::consts::PI * (j as f64 + 0.5) / M as f64 * 2.0;
                Complex64::from_polar(1.0, th)
            })
            .collect();
        let n = lin.len();
        let mut out = Etd {
            e: Vec::with_capacity(n),
            e2: Vec::with_capacity(n),
            q: Vec::with_capacity(n),
            f1: Vec::with_capacity(n),
            f2: Vec::with_capacity(n),
            f3: Vec::with_capacity(n),
        };
        for &l in lin {
            let hl = l * h;
            out.e.push(hl.exp());
            out.e2.push((hl * 0.5).exp());
            let mut acc = [Complex64::new(0.0, 0.0); 4];
            for r in &roots {
                let z = hl + r;
                let ez = z.exp();
                let z3 = z * z * z;
                acc[0] += ((z * 0.5).exp() - 1.0) / z;
                acc[1] += (-4.0 - z + ez * (4.0 - 3.0 * z + z * z)) / z3;
                acc[2] += (2.0 + z + ez * (z - 2.0)) / z3;
                acc[3] += (-4.0 - 3.0 * z - z * z + ez * (4.0 - z)) / z3;
            }
            let s = h / M as f64;
            out.q.push(acc[0] * s);
            out.f1.push(acc[1] * s);
            out.f2.push(acc[2] * s);
            out.f3.push(acc[3] * s);
        }
        out
    }
}

struct IntegratingFactor {
    e: Vec<Complex64>,
    e2: Vec<Complex64>,
}

enum Coefficients {
    Etd(Etd),
    If(IntegratingFactor),
}

/// Evaluates the projected flux `-i k P F[a u^m]` (plus the sponge) on a spectrum.
struct Nonlinear {
    ops: SpectralOps,
    m: i32,
    /// `-i k` on retained modes, 0 elsewhere.
    flux_symbol: Vec<Complex64>,
    mask: Vec<f64>,
    a_vals: Vec<f64>,
    sigma: Option<Vec<f64>>,
    scratch: Vec<Complex64>,
    damp: Vec<Complex64>,
}

impl Nonlinear {
    fn eval(&mut self, v: &[Complex64], out: &mut [Complex64]) {
        let s = 1.0 / v.len() as f64;
        self.scratch.copy_from_slice(v);
        self.ops.inverse.process(&mut self.scratch);
        if let Some(sig) = &self.sigma {
            for ((d, z), g) in self.damp.iter_mut().zip(&self.scratch).zip(sig) {
                *d = Complex64::new(g * z.re * s, 0.0);
            }
            self.ops.forward.process(&mut self.damp);
        }
        for (z, a) in self.scratch.iter_mut().zip(&self.a_vals) {
            let u = z.re * s;
            *z = Complex64::new(a * u.powi(self.m), 0.0);
        }
        self.ops.forward.process(&mut self.scratch);
        for ((o, z), fs) in out.iter_mut().zip(&self.scratch).zip(&self.flux_symbol) {
            *o = z * fs;
        }
        if self.sigma.is_some() {
            for ((o, z), mk) in out.iter_mut().zip(&self.damp).zip(&self.mask) {
                *o -= z * mk;
            }
        }
    }
}

/// Fixed-step exponential integrator owning the Fourier-space state of one run.
pub struct Stepper {
    cfg: StepperConfig,
    nl: Nonlinear,
    coeffs: Coefficients,
    spec: Vec<Complex64>,
    t0: f64,
    steps: u64,
    cutoff: usize,
    work: [Vec<Complex64>; 6],
}

impl Stepper {
    /// Projects `initial` onto the retained band and prepares the scheme.
    pub fn new(cfg: StepperConfig, initial: &FieldState) -> Result<Self> {
        cfg.validate()?;
        if !initial.is_finite() {
            return Err(Error::BlowUp { t: initial.t });
        }
        let grid = initial.grid;
        let ops = SpectralOps::new(grid);
        let cutoff = cfg.cutoff(&grid);
        let mask: Vec<f64> = (0..grid.n())
            .map(|j| {
                if grid.mode(j).unsigned_abs() as usize <= cutoff {
                    1.0
                } else {
                    0.0
                }
            })
            .collect();
        let k = grid.wavenumbers();
        let flux_symbol = k
            .iter()
            .zip(&mask)
            .map(|(&k, &m)| Complex64::new(0.0, -k * m))
            .collect();
        let lin: Vec<Complex64> = k
            .iter()
            .map(|&k| Complex64::new(0.0, k * k * k + cfg.lambda * k))
            .collect();
        let coeffs = match cfg.scheme {
            Scheme::Etdrk4 => Coefficients::Etd(Etd::new(&lin, cfg.dt)),
            Scheme::IntegratingFactor => Coefficients::If(IntegratingFactor {
                e: lin.iter().map(|l| (l * cfg.dt).exp()).collect(),
                e2: lin.iter().map(|l| (l * (0.5 * cfg.dt)).exp()).collect(),
            }),
        };
        let a_vals = (0..grid.n()).map(|j| cfg.potential.a(cfg.eps * grid.x(j))).collect();
        let sigma = cfg
            .sponge
            .map(|s| (0..grid.n()).map(|j| s.sigma(&grid, grid.x(j))).collect());
        let mut spec = ops.forward(&initial.values);
        for (z, m) in spec.iter_mut().zip(&mask) {
            *z *= m;
        }
        let zero = vec![Complex64::new(0.0, 0.0); grid.n()];
        Ok(Stepper {
            nl: Nonlinear {
                ops,
                m: cfg.m.get() as i32,
                flux_symbol,
                mask,
                a_vals,
                sigma,
                scratch: zero.clone(),
                damp: zero.clone(),
            },
            cfg,
            coeffs,
            spec,
            t0: initial.t,
            steps: 0,
            cutoff,
            work: std::array::from_fn(|_| zero.clone()),
        })
    }

    pub fn config(&self) -> &StepperConfig {
        &self.cfg
    }

    pub fn grid(&self) -> &Grid {
        self.nl.ops.grid()
    }

    pub fn ops(&self) -> &SpectralOps {
        &self.nl.ops
    }

    pub fn t(&self) -> f64 {
        self.t0 + self.steps as f64 * self.cfg.dt
    }

    pub fn steps(&self) -> u64 {
        self.steps
    }

    /// Current physical-space field.
    pub fn state(&self) -> FieldState {
        FieldState {
            t: self.t(),
            grid: *self.grid(),
            values: self.nl.ops.inverse_real(&self.spec),
        }
    }

    /// Largest imaginary part of the inverse transform relative to the largest real part.
    pub fn imaginary_residue(&self) -> f64 {
        let mut buf = self.spec.clone();
        self.nl.ops.inverse.process(&mut buf);
        let re = buf.iter().map(|z| z.re.abs()).fold(0.0, f64::max);
        let im = buf.iter().map(|z| z.im.abs()).fold(0.0, f64::max);
        if re == 0.0 {
            im
        } else {
            im / re
        }
    }

    /// Fraction of spectral energy in the top third of the retained band.
    pub fn top_band_fraction(&self) -> f64 {
        let lo = 2 * self.cutoff / 3;
        let grid = self.grid();
        let mut top = 0.0;
        let mut total = 0.0;
        for (j, z) in self.spec.iter().enumerate() {
            let e = z.norm_sqr();
            total += e;
            if grid.mode(j).unsigned_abs() as usize > lo {
                top += e;
            }
        }
        if total == 0.0 {
            0.0
        } else {
            top / total
        }
    }

    fn symmetrize(&mut self) {
        let n = self.spec.len();
        self.spec[0].im = 0.0;
        for j in 1..n / 2 {
            let a = self.spec[j];
            let b = self.spec[n - j].conj();
            let avg = (a + b) * 0.5;
            self.spec[j] = avg;
            self.spec[n - j] = avg.conj();
        }
        self.spec[n / 2] = Complex64::new(0.0, 0.0);
    }

    /// Advances one step of length `dt`.
    pub fn step(&mut self) -> Result<()> {
        let n = self.spec.len();
        let h = self.cfg.dt;
        let [nv, na, nb, nc, a, tmp] = &mut self.work;
        let v = &self.spec;
        let nl = &mut self.nl;
        let new: Vec<Complex64> = match &self.coeffs {
            Coefficients::Etd(c) => {
                nl.eval(v, nv);
                for j in 0..n {
                    a[j] = c.e2[j] * v[j] + c.q[j] * nv[j];
                }
                nl.eval(a, na);
                for j in 0..n {
                    tmp[j] = c.e2[j] * v[j] + c.q[j] * na[j];
                }
                nl.eval(tmp, nb);
                for j in 0..n {
                    tmp[j] = c.e2[j] * a[j] + c.q[j] * (nb[j] * 2.0 - nv[j]);
                }
                nl.eval(tmp, nc);
                (0..n)
                    .map(|j| c.e[j] * v[j] + nv[j] * c.f1[j] + (na[j] + nb[j]) * 2.0 * c.f2[j] + nc[j] * c.f3[j])
                    .collect()
            }
            Coefficients::If(c) => {
                nl.eval(v, nv);
                for j in 0..n {
                    tmp[j] = c.e2[j] * (v[j] + nv[j] * (0.5 * h));
                }
                nl.eval(tmp, na);
                for j in 0..n {
                    tmp[j] = c.e2[j] * v[j] + na[j] * (0.5 * h);
                }
                nl.eval(tmp, nb);
                for j in 0..n {
                    tmp[j] = c.e[j] * v[j] + c.e2[j] * nb[j] * h;
                }
                nl.eval(tmp, nc);
                (0..n)
                    .map(|j| c.e[j] * v[j] + (c.e[j] * nv[j] + c.e2[j] * (na[j] + nb[j]) * 2.0 + nc[j]) * (h / 6.0))
                    .collect()
            }
        };
        self.spec = new;
        for (z, m) in self.spec.iter_mut().zip(&self.nl.mask) {
            *z *= m;
        }
        self.symmetrize();
        self.steps += 1;
        if !self.spec.iter().all(|z| z.re.is_finite() && z.im.is_finite()) {
            return Err(Error::BlowUp { t: self.t() });
        }
        let every = self.cfg.alias_check_every as u64;
        if every > 0 && self.steps.is_multiple_of(every) {
            let f = self.top_band_fraction();
            if f > self.cfg.alias_threshold {
                return Err(Error::AliasingAlarm {
                    t: self.t(),
                    fraction: f,
                });
            }
        }
        Ok(())
    }

    /// Steps until `t_end` (rounded to a whole number of steps).
    pub fn advance_to(&mut self, t_end: f64) -> Result<()> {
        let target = ((t_end - self.t0) / self.cfg.dt).round();
        if target < self.steps as f64 {
            return Err(Error::invalid("t_end", t_end, "lies before the current time"));
        }
        while (self.steps as f64) < target {
            self.step()?;
        }
        Ok(())
    }
}

/// One step from `state`; convenient for tests, wasteful for long runs.
pub fn step(state: &FieldState, cfg: &StepperConfig) -> Result<FieldState> {
    let mut s = Stepper::new(cfg.clone(), state)?;
    s.step()?;
    Ok(s.state())
}

pub const SNAPSHOT_MAGIC: [u8; 4] = *b"GKDV";
pub const SNAPSHOT_VERSION: u32 = 1;
const HEADER_LEN: usize = 4 + 4 + 6 * 8 + 4;

/// A field together with the parameters needed to reproduce it.
#[derive(Clone, Debug, PartialEq)]
pub struct Snapshot {
    pub m: f64,
    pub lambda: f64,
    pub eps: f64,
    pub gamma: f64,
    pub state: FieldState,
}

impl Snapshot {
    pub fn to_bytes(&self) -> Vec<u8> {
        let n = self.state.grid.n();
        let mut out = Vec::with_capacity(HEADER_LEN + 8 * n);
        out.extend_from_slice(&SNAPSHOT_MAGIC);
        out.extend_from_slice(&SNAPSHOT_VERSION.to_le_bytes());
        for v in [
            self.m,
            self.lambda,
            self.eps,
            self.gamma,
            self.state.grid.length(),
            self.state.t,
        ] {
            out.extend_from_slice(&v.to_le_bytes());
        }
        out.extend_from_slice(&(n as u32).to_le_bytes());
        for v in &self.state.values {
            out.extend_from_slice(&v.to_le_bytes());
        }
        out
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self> {
        if bytes.len() < HEADER_LEN {
            return Err(Error::LengthMismatch {
                expected: HEADER_LEN,
                found: bytes.len(),
            });
        }
        let magic: [u8; 4] = bytes[0..4].try_into().unwrap();
        if magic != SNAPSHOT_MAGIC {
            return Err(Error::BadMagic { found: magic });
        }
        let version = u32::from_le_bytes(bytes[4..8].try_into().unwrap());
        if version != SNAPSHOT_VERSION {
            return Err(Error::VersionMismatch {
                expected: SNAPSHOT_VERSION,
                found: version,
            });
        }
        let f = |i: usize| f64::from_le_bytes(bytes[8 + 8 * i..16 + 8 * i].try_into().unwrap());
        let (m, lambda, eps, gamma, length, t) = (f(0), f(1), f(2), f(3), f(4), f(5));
        let n = u32::from_le_bytes(bytes[56..60].try_into().unwrap()) as usize;
        let payload = &bytes[HEADER_LEN..];
        if payload.len() != 8 * n {
            return Err(Error::LengthMismatch {
                expected: n,
                found: payload.len() / 8,
            });
        }
        let values = payload
            .chunks_exact(8)
            .map(|c| f64::from_le_bytes(c.try_into().unwrap()))
            .collect();
        let grid = Grid::new(n, length)?;
        Ok(Snapshot {
            m,
            lambda,
            eps,
            gamma,
            state: FieldState { t, grid, values },
        })
    }
}

/// Writes `bytes` to a sibling temporary file and renames it into place.
pub fn write_atomic(path: &Path, bytes: &[u8]) -> Result<()> {
    let tmp = path.with_extension(match path.extension() {
        Some(e) => format!("{}.tmp", e.to_string_lossy()),
        None => "tmp".to_string(),
    });
    let mut f = fs::File::create(&tmp).map_err(|e| Error::io(&tmp, e))?;
    f.write_all(bytes).map_err(|e| Error::io(&tmp, e))?;
    f.sync_all().map_err(|e| Error::io(&tmp, e))?;
    drop(f);
    fs::rename(&tmp, path).map_err(|e| Error::io(path, e))
}

pub fn save_snapshot(snapshot: &Snapshot, path: &Path) -> Result<()> {
    write_atomic(path, &snapshot.to_bytes())
}

pub fn load_snapshot(path: &Path) -> Result<Snapshot> {
    let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
    Snapshot::from_bytes(&bytes)
}
