//! Monitoring functionals: modified masses, the virial weight and functional,
//! and the `J` functional built on `chi_c(y) = int_{-inf}^y Lambda Q_c`.

use std::io::Write;

use crate::error::{Error, Result};
use crate::potential::{tilde_a, Potential};
use crate::quadrature::{cumulative_gauss, gauss_legendre, lagrange8};
use crate::soliton::{soliton_integrals, Exponent, ScaledSoliton};
use crate::spectral::{FieldState, SpectralOps, StepperConfig};

#[derive(Clone, Debug, PartialEq)]
pub struct DiagnosticParams {
    pub m: Exponent,
    pub lambda: f64,
    pub eps: f64,
    pub potential: Potential,
}

impl From<&StepperConfig> for DiagnosticParams {
    fn from(cfg: &StepperConfig) -> Self {
        DiagnosticParams {
            m: cfg.m,
            lambda: cfg.lambda,
            eps: cfg.eps,
            potential: cfg.potential,
        }
    }
}

/// `1/2 int a^{1/m}(eps x) u^2`
pub fn modified_mass_hat(u: &FieldState, params: &DiagnosticParams) -> f64 {
    let p = 1.0 / params.m.as_f64();
    let g = &u.grid;
    0.5 * g.dx()
        * (0..g.n())
            .map(|j| params.potential.a(params.eps * g.x(j)).powf(p) * u.values[j] * u.values[j])
            .sum::<f64>()
}

/// `int u^2 / (2 a(eps x))`
pub fn modified_mass_curly(u: &FieldState, params: &DiagnosticParams) -> f64 {
    let g = &u.grid;
    0.5 * g.dx()
        * (0..g.n())
            .map(|j| u.values[j] * u.values[j] / params.potential.a(params.eps * g.x(j)))
            .sum::<f64>()
}

const BLEND_END: f64 = 1.5;

// log phi = -x + h(x) on [1, 1.5], h a quintic Hermite blend with h(1) = 1, h'(1) = 1
// and h, h', h'' = 0 at 1.5; phi is C^2 and e^{-x} <= phi <= 3 e^{-x}.
fn blend_h(x: f64) -> f64 {
    let w = BLEND_END - 1.0;
    let t = (x - 1.0) / w;
    let h0 = 1.0 - t * t * t * (10.0 - 15.0 * t + 6.0 * t * t);
    let h1 = t * (1.0 - t).powi(3) * (1.0 + 3.0 * t);
    h0 + w * h1
}

/// Virial weight `psi_A(x) = A (psi(inf) + psi(x/A))`, `psi(x) = int_0^x phi`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct VirialWeight {
    pub a: f64,
    psi_blend: f64,
}

impl VirialWeight {
    pub fn new(a: f64) -> Result<Self> {
        if !(a > 0.0 && a.is_finite()) {
            return Err(Error::invalid("A", a, "must be positive"));
        }
        let psi_blend = gauss_legendre(&Self::phi, 1.0, BLEND_END);
        Ok(VirialWeight { a, psi_blend })
    }

    /// Even, 1 on `[0, 1]`, `e^{-|x|}` beyond 1.5.
    pub fn phi(x: f64) -> f64 {
        let x = x.abs();
        if x <= 1.0 {
            1.0
        } else if x >= BLEND_END {
            (-x).exp()
        } else {
            (-x + blend_h(x)).exp()
        }
    }

    /// `int_0^x phi`, odd.
    pub fn psi(&self, x: f64) -> f64 {
        let s = x.abs();
        let v = if s <= 1.0 {
            s
        } else if s <= BLEND_END {
            1.0 + gauss_legendre(&Self::phi, 1.0, s)
        } else {
            1.0 + self.psi_blend + (-BLEND_END).exp() - (-s).exp()
        };
        v.copysign(x)
    }

    pub fn psi_infinity(&self) -> f64 {
        1.0 + self.psi_blend + (-BLEND_END).exp()
    }

    /// `int_s^inf phi` for `s >= 0`.
    fn tail(&self, s: f64) -> f64 {
        if s >= BLEND_END {
            (-s).exp()
        } else if s >= 1.0 {
            gauss_legendre(&Self::phi, s, BLEND_END) + (-BLEND_END).exp()
        } else {
            self.psi_infinity() - s
        }
    }

    pub fn psi_a(&self, x: f64) -> f64 {
        let s = x / self.a;
        if s < 0.0 {
            self.a * self.tail(-s)
        } else {
            self.a * (self.psi_infinity() + self.psi(s))
        }
    }

    pub fn psi_a_prime(&self, x: f64) -> f64 {
        Self::phi(x / self.a)
    }
}

/// `int z^2 psi_A(x - rho)` with `x - rho` taken on the circle.
pub fn virial_functional(z: &FieldState, rho: f64, weight: &VirialWeight) -> f64 {
    let g = &z.grid;
    g.dx()
        * (0..g.n())
            .map(|j| z.values[j] * z.values[j] * weight.psi_a(g.periodic_offset(g.x(j), rho)))
            .sum::<f64>()
}

/// `int (z_x^2 + z^2) e^{-|x - rho|/A}`
pub fn localized_h1_mass(ops: &SpectralOps, z: &[f64], rho: f64, a: f64) -> f64 {
    let g = ops.grid();
    let zx = ops.derivative(z);
    g.dx()
        * (0..g.n())
            .map(|j| (zx[j] * zx[j] + z[j] * z[j]) * (-g.periodic_offset(g.x(j), rho).abs() / a).exp())
            .sum::<f64>()
}

/// `chi_c(y) = int_{-inf}^y Lambda Q_c`, tabulated.
#[derive(Clone, Debug, PartialEq)]
pub struct Chi {
    pub c: f64,
    pub m: Exponent,
    y0: f64,
    h: f64,
    values: Vec<f64>,
}

impl Chi {
    pub fn new(c: f64, m: Exponent) -> Result<Self> {
        let q = ScaledSoliton::new(c, m)?;
        let half = 1.5 * q.support_half_width();
        let h = 0.005;
        let n = (2.0 * half / h).ceil() as usize + 1;
        let values = cumulative_gauss(|s| q.lambda_q(s), -half, h, n);
        Ok(Chi {
            c,
            m,
            y0: -half,
            h,
            values,
        })
    }

    pub fn value(&self, y: f64) -> f64 {
        if y <= self.y0 {
            0.0
        } else if y >= self.y0 + (self.values.len() - 1) as f64 * self.h {
            self.limit()
        } else {
            lagrange8(&self.values, self.y0, self.h, y)
        }
    }

    /// `chi_c(+inf) = int Lambda Q_c`
    pub fn limit(&self) -> f64 {
        *self.values.last().expect("nonempty table")
    }
}

/// `e = (3 lambda0 c - lambda) a~(eps rho) / (2 theta c^{2 theta - 1} M[Q])`
pub fn j_prefactor(c: f64, rho: f64, params: &DiagnosticParams) -> Result<f64> {
    let m = params.m;
    let theta = m.theta();
    let mass = soliton_integrals(1.0, m.get())?.mass;
    Ok(
        (3.0 * m.lambda0() * c - params.lambda) * tilde_a(&params.potential, params.eps * rho, m)
            / (2.0 * theta * c.powf(2.0 * theta - 1.0) * mass),
    )
}

/// `J = e(t) int chi_c(x - rho) z(x) dx`
pub fn j_functional(z: &FieldState, c: f64, rho: f64, params: &DiagnosticParams) -> Result<f64> {
    let e = j_prefactor(c, rho, params)?;
    if e == 0.0 {
        return Ok(0.0);
    }
    let chi = Chi::new(c, params.m)?;
    let g = &z.grid;
    let integral = g.dx()
        * (0..g.n())
            .map(|j| chi.value(g.periodic_offset(g.x(j), rho)) * z.values[j])
            .sum::<f64>();
    Ok(e * integral)
}

/// Time series of a scalar functional.
#[derive(Clone, Debug, PartialEq)]
pub struct FunctionalSeries {
    pub name: String,
    pub manifest_hash: Option<String>,
    samples: Vec<(f64, f64)>,
}

impl FunctionalSeries {
    pub fn new(name: impl Into<String>) -> Self {
        FunctionalSeries {
            name: name.into(),
            manifest_hash: None,
            samples: Vec::new(),
        }
    }

    pub fn with_manifest(mut self, hash: impl Into<String>) -> Self {
        self.manifest_hash = Some(hash.into());
        self
    }

    /// Rejects non-finite values and times that do not increase.
    pub fn push(&mut self, t: f64, value: f64) -> Result<()> {
        if !value.is_finite() {
            return Err(Error::invalid("value", value, "functional value must be finite"));
        }
        if let Some(&(last, _)) = self.samples.last() {
            if t <= last {
                return Err(Error::invalid("t", t, "times must increase"));
            }
        }
        self.samples.push((t, value));
        Ok(())
    }

    pub fn samples(&self) -> &[(f64, f64)] {
        &self.samples
    }

    /// Largest increase `F(t') - F(t)` over `t' >= t`.
    pub fn max_rise(&self) -> f64 {
        let mut lowest = f64::INFINITY;
        let mut rise: f64 = 0.0;
        for &(_, v) in &self.samples {
            lowest = lowest.min(v);
            rise = rise.max(v - lowest);
        }
        rise
    }

    pub fn write_csv<W: Write>(&self, mut w: W) -> std::io::Result<()> {
        match &self.manifest_hash {
            Some(h) => writeln!(w, "# functional={} manifest={}", self.name, h)?,
            None => writeln!(w, "# functional={}", self.name)?,
        }
        writeln!(w, "t,value")?;
        for (t, v) in &self.samples {
            writeln!(w, "{:.10e},{:.16e}", t, v)?;
        }
        Ok(())
    }
}
