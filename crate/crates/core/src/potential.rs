//! Slowly varying potentials `a(r)` increasing from 1 to 2, their derivatives,
//! and a numerical checker for the admissibility hypotheses.

use crate::error::{Error, Result};
use crate::soliton::Exponent;

/// Shape of the potential.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum Profile {
    /// `a(r) = (3 + tanh(gamma r)) / 2`
    Tanh { gamma: f64 },
    /// `a(r) = value` (control runs)
    Constant { value: f64 },
    /// `a(r) = 1 + S((r + w)/(2w))` with the C^3 septic smoothstep `S`;
    /// `a'` is supported on `[-w, w]`.
    Smoothstep { half_width: f64 },
}

/// `a(r)` and its first three derivatives at one point.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Derivs {
    pub a: f64,
    pub d1: f64,
    pub d2: f64,
    pub d3: f64,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Potential {
    profile: Profile,
    /// Evaluate `a(-r)` instead of `a(r)`.
    mirrored: bool,
}

pub fn make_tanh_potential(gamma: f64) -> Result<Potential> {
    if !(gamma > 0.0) || !gamma.is_finite() {
        return Err(Error::invalid("gamma", gamma, "steepness must be positive"));
    }
    Ok(Potential::new(Profile::Tanh { gamma }))
}

fn septic(t: f64) -> [f64; 4] {
    if t <= 0.0 {
        return [0.0; 4];
    }
    if t >= 1.0 {
        return [1.0, 0.0, 0.0, 0.0];
    }
    let t2 = t * t;
    let t3 = t2 * t;
    let t4 = t3 * t;
    let u = 1.0 - t;
    [
        t4 * (35.0 - 84.0 * t + 70.0 * t2 - 20.0 * t3),
        140.0 * t3 * u * u * u,
        420.0 * t2 * u * u * (1.0 - 2.0 * t),
        840.0 * t * u * (5.0 * t2 - 5.0 * t + 1.0),
    ]
}

impl Potential {
    pub fn new(profile: Profile) -> Self {
        Potential {
            profile,
            mirrored: false,
        }
    }

    pub fn constant(value: f64) -> Self {
        Potential::new(Profile::Constant { value })
    }

    pub fn profile(&self) -> Profile {
        self.profile
    }

    pub fn is_mirrored(&self) -> bool {
        self.mirrored
    }

    /// The reflected potential `r -> a(-r)`.
    pub fn mirrored(&self) -> Potential {
        Potential {
            profile: self.profile,
            mirrored: !self.mirrored,
        }
    }

    pub fn is_constant(&self) -> bool {
        matches!(self.profile, Profile::Constant { .. })
    }

    fn raw(&self, r: f64) -> Derivs {
        match self.profile {
            Profile::Tanh { gamma } => {
                let t = (gamma * r).tanh();
                let s = 1.0 / (gamma * r).cosh();
                let s2 = s * s;
                Derivs {
                    a: 0.5 * (3.0 + t),
                    d1: 0.5 * gamma * s2,
                    d2: -gamma * gamma * s2 * t,
                    d3: gamma * gamma * gamma * s2 * (2.0 * t * t - s2),
                }
            }
            Profile::Constant { value } => Derivs {
                a: value,
                d1: 0.0,
                d2: 0.0,
                d3: 0.0,
            },
            Profile::Smoothstep { half_width } => {
                let k = 1.0 / (2.0 * half_width);
                let [s0, s1, s2, s3] = septic((r + half_width) * k);
                Derivs {
                    a: 1.0 + s0,
                    d1: s1 * k,
                    d2: s2 * k * k,
                    d3: s3 * k * k * k,
                }
            }
        }
    }

    pub fn derivs(&self, r: f64) -> Derivs {
        if self.mirrored {
            let d = self.raw(-r);
            Derivs {
                a: d.a,
                d1: -d.d1,
                d2: d.d2,
                d3: -d.d3,
            }
        } else {
            self.raw(r)
        }
    }

    pub fn a(&self, r: f64) -> f64 {
        self.derivs(r).a
    }

    pub fn a_prime(&self, r: f64) -> f64 {
        self.derivs(r).d1
    }

    /// `a(r) - 1` and `2 - a(r)` computed without cancellation.
    pub fn gaps(&self, r: f64) -> (f64, f64) {
        let r = if self.mirrored { -r } else { r };
        match self.profile {
            Profile::Tanh { gamma } => (
                1.0 / (1.0 + (-2.0 * gamma * r).exp()),
                1.0 / (1.0 + (2.0 * gamma * r).exp()),
            ),
            _ => {
                let a = self.raw(r).a;
                (a - 1.0, 2.0 - a)
            }
        }
    }

    /// Smallest `R >= 0` with `|a'(r)| < tol` for all `|r| >= R`.
    pub fn flat_radius(&self, tol: f64) -> f64 {
        match self.profile {
            Profile::Constant { .. } => 0.0,
            Profile::Smoothstep { half_width } => half_width,
            Profile::Tanh { gamma } => {
                // gamma/2 sech^2(gamma R) = tol
                let s = (2.0 * tol / gamma).sqrt();
                if s >= 1.0 {
                    0.0
                } else {
                    (1.0 / s).acosh() / gamma
                }
            }
        }
    }
}

/// `a~(s) = a(s)^{1/(m-1)}`.
pub fn tilde_a(potential: &Potential, s: f64, m: Exponent) -> f64 {
    potential.a(s).powf(1.0 / (m.as_f64() - 1.0))
}

/// Exponential envelope `|g(r)| <= K e^{-gamma |r|}` fitted on samples.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct DecayFit {
    pub k: f64,
    pub gamma: f64,
    pub passed: bool,
}

/// Sampled constant of `|(a^{1/m})'''| <= K (a^{1/m})'`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct RatioCheck {
    pub k: f64,
    /// the same constant on a sampling twice as fine
    pub k_refined: f64,
    pub passed: bool,
}

#[derive(Clone, Debug, PartialEq)]
pub struct HypothesisReport {
    pub monotone: bool,
    pub bounded: bool,
    pub flat_left: DecayFit,
    pub flat_right: DecayFit,
    pub derivative_decay: [DecayFit; 3],
    pub third_derivative_ratio: RatioCheck,
    pub samples: usize,
}

impl HypothesisReport {
    pub fn all_passed(&self) -> bool {
        self.monotone
            && self.bounded
            && self.flat_left.passed
            && self.flat_right.passed
            && self.derivative_decay.iter().all(|d| d.passed)
            && self.third_derivative_ratio.passed
    }
}

/// Least-squares slope/intercept of `ln g` against `|r|`, then the smallest
/// `K` making the envelope hold on every sample.
fn fit_decay(points: &[(f64, f64)]) -> DecayFit {
    let usable: Vec<(f64, f64)> = points
        .iter()
        .filter(|(r, g)| r.abs() >= 1.0 && g.abs() > 0.0)
        .map(|&(r, g)| (r.abs(), g.abs().ln()))
        .collect();
    if usable.len() < 2 {
        let all_zero = points.iter().all(|(_, g)| *g == 0.0);
        return DecayFit {
            k: 0.0,
            gamma: f64::INFINITY,
            passed: all_zero,
        };
    }
    let n = usable.len() as f64;
    let mx = usable.iter().map(|p| p.0).sum::<f64>() / n;
    let my = usable.iter().map(|p| p.1).sum::<f64>() / n;
    let sxy: f64 = usable.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    let sxx: f64 = usable.iter().map(|p| (p.0 - mx) * (p.0 - mx)).sum();
    let gamma = -sxy / sxx;
    let k = points
        .iter()
        .map(|&(r, g)| g.abs() * (gamma * r.abs()).exp())
        .fold(0.0, f64::max);
    DecayFit {
        k,
        gamma,
        passed: gamma > 0.0 && k.is_finite(),
    }
}

/// `(b', b''')` for `b = a^{1/m}`.
fn root_derivs(d: &Derivs, q: f64) -> (f64, f64) {
    let g1 = q * d.a.powf(q - 1.0);
    let g2 = q * (q - 1.0) * d.a.powf(q - 2.0);
    let g3 = q * (q - 1.0) * (q - 2.0) * d.a.powf(q - 3.0);
    let b1 = g1 * d.d1;
    let b3 = g3 * d.d1.powi(3) + 3.0 * g2 * d.d1 * d.d2 + g1 * d.d3;
    (b1, b3)
}

fn ratio_constant(potential: &Potential, q: f64, range: f64, h: f64) -> f64 {
    let n = (2.0 * range / h).round() as usize;
    let mut k: f64 = 0.0;
    for i in 0..=n {
        let r = -range + i as f64 * h;
        let (b1, b3) = root_derivs(&potential.derivs(r), q);
        if b1 > 0.0 {
            k = k.max(b3.abs() / b1);
        } else if b3 != 0.0 || b1 < 0.0 {
            return f64::INFINITY;
        } else {
            // b' = b''' = 0: the inequality cannot be checked against a positive
            // right-hand side, which the hypothesis requires.
            return f64::INFINITY;
        }
    }
    k
}

/// Checks the admissibility hypotheses on samples of `[-range, range]` with
/// spacing `h`. Failures are reported, not raised.
pub fn validate_hypotheses_on(potential: &Potential, m: Exponent, range: f64, h: f64) -> HypothesisReport {
    let n = (2.0 * range / h).round() as usize;
    let mut monotone = true;
    let mut bounded = true;
    let mut left = Vec::new();
    let mut right = Vec::new();
    let mut derivs: [Vec<(f64, f64)>; 3] = [Vec::new(), Vec::new(), Vec::new()];
    for i in 0..=n {
        let r = -range + i as f64 * h;
        let d = potential.derivs(r);
        let (lo, hi) = potential.gaps(r);
        monotone &= d.d1 > 0.0;
        bounded &= lo > 0.0 && hi > 0.0;
        if r <= 0.0 {
            left.push((r, lo));
        }
        if r >= 0.0 {
            right.push((r, hi));
        }
        derivs[0].push((r, d.d1));
        derivs[1].push((r, d.d2));
        derivs[2].push((r, d.d3));
    }
    let q = 1.0 / m.as_f64();
    let k = ratio_constant(potential, q, range, h);
    let k_refined = ratio_constant(potential, q, range, 0.5 * h);
    HypothesisReport {
        monotone,
        bounded,
        flat_left: fit_decay(&left),
        flat_right: fit_decay(&right),
        derivative_decay: [fit_decay(&derivs[0]), fit_decay(&derivs[1]), fit_decay(&derivs[2])],
        third_derivative_ratio: RatioCheck {
            k,
            k_refined,
            passed: k.is_finite() && k_refined <= 1.01 * k + 1e-12,
        },
        samples: n + 1,
    }
}

/// [`validate_hypotheses_on`] over `r in [-50, 50]` with spacing `0.01`.
pub fn validate_hypotheses(potential: &Potential, m: Exponent) -> HypothesisReport {
    validate_hypotheses_on(potential, m, 50.0, 0.01)
}
