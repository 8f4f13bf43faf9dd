//! Slow modulation dynamics for the scaling `C(t)` and position `P(t)`:
//!
//! ```text
//! C' = eps f1(C, P),   P' = C - lambda,
//! ```
//!
//! the algebraic threshold `lambda~` and final scaling `c_inf`, and the first
//! and second order coefficient functions.

use std::io::Write;

use crate::error::{Error, Result};
use crate::ode::{Integrator, Tolerances};
use crate::potential::{Potential, Profile};
use crate::quadrature::composite_gauss;
use crate::roots::bisect_newton;
use crate::soliton::{self, Exponent};

/// Distance to `lambda~` under which the asymptotic laws are refused.
pub const DEGENERATE_WINDOW: f64 = 1e-6;

/// How the interaction starts.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum StartRule {
    /// `T_eps = eps^{-1.01}/(1 - lambda)`, `P(-T_eps) = -(1 - lambda) T_eps`.
    TEps,
    /// Start where `|a'(eps P)| < 1e-12`, so the potential is flat to machine precision.
    Flat,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Branch {
    Refraction,
    Reflection,
}

impl std::fmt::Display for Branch {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Branch::Refraction => write!(f, "refraction"),
            Branch::Reflection => write!(f, "reflection"),
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct EffectiveParams {
    m: Exponent,
    lambda: f64,
    eps: f64,
    potential: Potential,
    start: StartRule,
    horizon: f64,
    xi: f64,
    shape_ratio: f64,
    lambda_tilde: f64,
}

impl EffectiveParams {
    pub fn new(m: u32, lambda: f64, eps: f64, potential: Potential) -> Result<Self> {
        let m = Exponent::new(m)?;
        if !(0.0..1.0).contains(&lambda) {
            return Err(Error::invalid("lambda", lambda, "must lie in [0, 1)"));
        }
        if !(eps > 0.0 && eps <= 1.0) {
            return Err(Error::invalid("eps", eps, "must lie in (0, 1]"));
        }
        Ok(EffectiveParams {
            m,
            lambda,
            eps,
            potential,
            start: StartRule::TEps,
            horizon: 50.0,
            xi: soliton::xi(m),
            shape_ratio: soliton::shape_ratio(m),
            lambda_tilde: solve_lambda_tilde(m.get())?,
        })
    }

    pub fn with_start(mut self, start: StartRule) -> Self {
        self.start = start;
        self
    }

    /// Escape must happen before `t_start + horizon * |t_start|`.
    pub fn with_horizon(mut self, horizon: f64) -> Self {
        self.horizon = horizon;
        self
    }

    pub fn exponent(&self) -> Exponent {
        self.m
    }

    pub fn lambda(&self) -> f64 {
        self.lambda
    }

    pub fn eps(&self) -> f64 {
        self.eps
    }

    pub fn lambda0(&self) -> f64 {
        self.m.lambda0()
    }

    pub fn lambda_tilde(&self) -> f64 {
        self.lambda_tilde
    }

    pub fn potential(&self) -> &Potential {
        &self.potential
    }

    pub fn start_rule(&self) -> StartRule {
        self.start
    }

    pub fn xi(&self) -> f64 {
        self.xi
    }

    pub fn is_degenerate(&self) -> bool {
        (self.lambda - self.lambda_tilde).abs() <= DEGENERATE_WINDOW
    }

    /// Branch predicted by comparing `lambda` with `lambda~`.
    pub fn expected_branch(&self) -> Branch {
        if self.lambda < self.lambda_tilde {
            Branch::Refraction
        } else {
            Branch::Reflection
        }
    }

    /// `eps^{-1.01}/(1 - lambda)`.
    pub fn t_eps(&self) -> f64 {
        self.eps.powf(-1.01) / (1.0 - self.lambda)
    }

    /// Initial time and position `(t_start, P(t_start))` for the chosen start rule.
    pub fn start_point(&self) -> (f64, f64) {
        match self.start {
            StartRule::TEps => {
                let t = self.t_eps();
                (-t, -(1.0 - self.lambda) * t)
            }
            StartRule::Flat => {
                let r = self.potential.flat_radius(1e-12).max(1.0) / self.eps;
                (-r / (1.0 - self.lambda), -r)
            }
        }
    }

    fn log_derivative(&self, p: f64) -> f64 {
        let d = self.potential.derivs(self.eps * p);
        d.d1 / d.a
    }

    /// Longest step that lets `eps P` move by at most half a potential length scale.
    fn max_step(&self) -> f64 {
        let scale = match self.potential.profile() {
            Profile::Tanh { gamma } => 1.0 / gamma,
            Profile::Smoothstep { half_width } => half_width,
            Profile::Constant { .. } => 1.0,
        };
        0.5 * scale / self.eps
    }

    fn rhs(&self, y: &[f64; 4]) -> [f64; 4] {
        let (c, p) = (y[0], y[1]);
        let lq = self.log_derivative(p);
        let l0 = self.lambda0();
        let w = 3.0 * l0 * c - self.lambda;
        [
            self.eps * self.m.scaling_power() * c * (c - self.lambda / l0) * lq,
            c - self.lambda,
            self.eps * w * w * lq / c.sqrt(),
            self.eps * self.f2(c, p),
        ]
    }

    /// `(4/(m+3)) C (C - lambda/lambda0) a'(eps P)/a(eps P)`.
    pub fn f1(&self, c: f64, p: f64) -> f64 {
        self.m.scaling_power() * c * (c - self.lambda / self.lambda0()) * self.log_derivative(p)
    }

    /// `-(xi_m/sqrt c)(lambda - 3 lambda0 c) a'(eps rho)/a(eps rho)`.
    pub fn f2(&self, c: f64, rho: f64) -> f64 {
        -(self.xi / c.sqrt()) * (self.lambda - 3.0 * self.lambda0() * c) * self.log_derivative(rho)
    }

    /// `(xi~_3/sqrt c)(c - lambda)(a'/a)^2` with `xi~_3 = (lambda/2)(int Q)^2/int Q^2`;
    /// only defined for the cubic case.
    pub fn f3(&self, c: f64, rho: f64) -> Result<f64> {
        if self.m.get() != 3 {
            return Err(Error::ContractViolation(self.m.get()));
        }
        let xi3 = 0.5 * self.lambda * self.shape_ratio;
        let l = self.log_derivative(rho);
        Ok(xi3 / c.sqrt() * (c - self.lambda) * l * l)
    }
}

/// Free-function forms of the coefficient functions.
pub fn f1(c: f64, p: f64, params: &EffectiveParams) -> f64 {
    params.f1(c, p)
}

pub fn f2(c: f64, rho: f64, params: &EffectiveParams) -> f64 {
    params.f2(c, rho)
}

pub fn f3(c: f64, rho: f64, params: &EffectiveParams) -> Result<f64> {
    params.f3(c, rho)
}

/// Threshold `lambda~` in `(lambda0, 1)`:
/// `lambda ((1 - lambda0)/(lambda - lambda0))^{1 - lambda0} = 2^{4/(m+3)}`.
pub fn solve_lambda_tilde(m: u32) -> Result<f64> {
    solve_lambda_tilde_in(m, 1e-9)
}

/// Same root with the bracket `(lambda0 + delta, 1 - delta)`.
pub fn solve_lambda_tilde_in(m: u32, delta: f64) -> Result<f64> {
    let e = Exponent::new(m)?;
    let l0 = e.lambda0();
    let target = e.scaling_power() * std::f64::consts::LN_2;
    // log form is monotone decreasing and well scaled near lambda0
    let h = |l: f64| l.ln() + (1.0 - l0) * ((1.0 - l0) / (l - l0)).ln() - target;
    let dh = |l: f64| 1.0 / l - (1.0 - l0) / (l - l0);
    bisect_newton(h, dh, l0 + delta, 1.0 - delta)
}

/// Residual of the threshold equation in its original (non-logarithmic) form.
pub fn lambda_tilde_residual(m: Exponent, l: f64) -> f64 {
    let l0 = m.lambda0();
    l * ((1.0 - l0) / (l - l0)).powf(1.0 - l0) - 2f64.powf(m.scaling_power())
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ScalingLaw {
    pub lambda_tilde: f64,
    pub c_inf: f64,
    pub branch: Branch,
    pub kappa: f64,
    /// Residual of the defining equation at `c_inf`, original form.
    pub residual: f64,
}

/// Final scaling `c_inf(lambda)` and shape factor.
pub fn solve_c_infinity(lambda: f64, m: u32) -> Result<ScalingLaw> {
    solve_c_infinity_with(lambda, m, 0.0)
}

/// As [`solve_c_infinity`] with every bracket endpoint pulled inward by `shrink`.
pub fn solve_c_infinity_with(lambda: f64, m: u32, shrink: f64) -> Result<ScalingLaw> {
    let e = Exponent::new(m)?;
    if !(lambda > 0.0 && lambda < 1.0) {
        return Err(Error::invalid("lambda", lambda, "must lie in (0, 1)"));
    }
    let lt = solve_lambda_tilde(m)?;
    if (lambda - lt).abs() <= DEGENERATE_WINDOW {
        return Err(Error::DegenerateLambda {
            lambda,
            threshold: lt,
            distance: (lambda - lt).abs(),
        });
    }
    let l0 = e.lambda0();
    let p = e.scaling_power();
    if (lambda - l0).abs() <= 1e-12 {
        return Ok(ScalingLaw {
            lambda_tilde: lt,
            c_inf: 1.0,
            branch: Branch::Refraction,
            kappa: e.refraction_kappa(),
            residual: 0.0,
        });
    }
    let (branch, rhs) = if lambda < lt {
        (Branch::Refraction, 2f64.powf(p))
    } else {
        (Branch::Reflection, 1.0)
    };
    let ln_rhs = rhs.ln();
    let h = |c: f64| l0 * c.ln() + (1.0 - l0) * ((lambda - c * l0) / (lambda - l0)).ln() - ln_rhs;
    let dh = |c: f64| l0 / c - (1.0 - l0) * l0 / (lambda - c * l0);
    let (lo, hi) = match branch {
        Branch::Reflection => (lambda * 1e-12, lambda),
        Branch::Refraction if lambda > l0 => (lambda, 1.0),
        Branch::Refraction => {
            let lo = lambda / l0 * (1.0 + 1e-12);
            let mut hi = 2.0 * lo.max(1.0);
            while h(hi) < 0.0 {
                hi *= 2.0;
            }
            (lo, hi)
        }
    };
    let width = hi - lo;
    let c = bisect_newton(h, dh, lo + shrink * width, hi - shrink * width)?;
    let residual = c.powf(l0) * ((lambda - c * l0) / (lambda - l0)).powf(1.0 - l0) - rhs;
    let kappa = match branch {
        Branch::Refraction => e.refraction_kappa(),
        Branch::Reflection => 1.0,
    };
    Ok(ScalingLaw {
        lambda_tilde: lt,
        c_inf: c,
        branch,
        kappa,
        residual,
    })
}

/// One recorded point of a trajectory. `refraction` and `drift` are the running
/// values of `eps int (3 lambda0 C - lambda)^2 a'/(sqrt(C) a) dt` and `eps int f2 dt`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Sample {
    pub t: f64,
    pub c: f64,
    pub p: f64,
    pub refraction: f64,
    pub drift: f64,
}

impl Sample {
    fn state(&self) -> [f64; 4] {
        [self.c, self.p, self.refraction, self.drift]
    }

    fn from_state(t: f64, y: &[f64; 4]) -> Self {
        Sample {
            t,
            c: y[0],
            p: y[1],
            refraction: y[2],
            drift: y[3],
        }
    }
}

#[derive(Clone, Debug)]
pub struct EffectiveTrajectory {
    pub params: EffectiveParams,
    /// Samples in increasing time.
    pub samples: Vec<Sample>,
    pub t_start: f64,
    pub p_start: f64,
    pub escape_time: f64,
    pub turning_time: Option<f64>,
    pub branch: Branch,
}

impl EffectiveTrajectory {
    pub fn first(&self) -> &Sample {
        &self.samples[0]
    }

    pub fn last(&self) -> &Sample {
        self.samples.last().expect("trajectories are never empty")
    }

    /// `C(T~)` and `P(T~)`.
    pub fn terminal(&self) -> (f64, f64) {
        let s = self.last();
        (s.c, s.p)
    }

    /// `|C(T~) - c_inf(lambda)|`, when `c_inf` is defined.
    pub fn terminal_error(&self) -> Option<f64> {
        let law = solve_c_infinity(self.params.lambda, self.params.m.get()).ok()?;
        Some((self.last().c - law.c_inf).abs())
    }

    /// `C^{lambda0} |lambda/lambda0 - C|^{1 - lambda0} / a(eps P)^{4/(m+3)}`.
    pub fn first_integral(&self, s: &Sample) -> f64 {
        let l0 = self.params.lambda0();
        let a = self.params.potential.a(self.params.eps * s.p);
        s.c.powf(l0) * (self.params.lambda / l0 - s.c).abs().powf(1.0 - l0) / a.powf(self.params.m.scaling_power())
    }

    /// Largest relative deviation of the first integral from its initial value.
    pub fn first_integral_drift(&self) -> f64 {
        let f0 = self.first_integral(self.first());
        self.samples
            .iter()
            .map(|s| (self.first_integral(s) / f0 - 1.0).abs())
            .fold(0.0, f64::max)
    }

    pub fn c_positive_and_monotone(&self) -> bool {
        let incr = self.last().c >= self.first().c;
        self.samples.iter().all(|s| s.c > 0.0)
            && self.samples.windows(2).all(|w| {
                let d = w[1].c - w[0].c;
                if incr {
                    d >= -1e-13
                } else {
                    d <= 1e-13
                }
            })
    }

    /// `(-T_eps, T~_eps)` located on this trajectory: the first time `P` reaches
    /// `-(1 - lambda) T_eps`, and the first later time `|P|` is back at that level
    /// (past the ramp after refraction, on the way out after reflection). `None` when
    /// `P` never gets as far as `-(1 - lambda) T_eps`.
    pub fn interaction_interval(&self) -> Option<(f64, f64)> {
        let level = (1.0 - self.params.lambda) * self.params.t_eps();
        let t0 = self.crossing(-level, self.samples[0].t, true)?;
        let t1 = match self.branch {
            Branch::Refraction => self.crossing(level, t0, true)?,
            Branch::Reflection => self.crossing(-level, self.turning_time?, false)?,
        };
        Some((t0, t1))
    }

    fn crossing(&self, level: f64, after: f64, rising: bool) -> Option<f64> {
        // the escape event lands on the level only to root-finder accuracy
        let tol = 1e-9 * level.abs().max(1.0);
        let side = |p: f64| if rising { p - level } else { level - p };
        let w = self
            .samples
            .windows(2)
            .find(|w| w[1].t > after && side(w[1].p) >= -tol)?;
        let (mut a, mut b) = (w[0].t.max(after), w[1].t);
        if side(self.state_at(a).1) >= -tol {
            return Some(a);
        }
        for _ in 0..100 {
            let mid = 0.5 * (a + b);
            if side(self.state_at(mid).1) < 0.0 {
                a = mid;
            } else {
                b = mid;
            }
        }
        Some(0.5 * (a + b))
    }

    /// `(C, P)` at time `t` by cubic Hermite interpolation between samples.
    pub fn state_at(&self, t: f64) -> (f64, f64) {
        let s = &self.samples;
        if t <= s[0].t {
            return (s[0].c, s[0].p);
        }
        if t >= self.last().t {
            return self.terminal();
        }
        let i = s.partition_point(|x| x.t <= t).max(1) - 1;
        let (a, b) = (&s[i], &s[i + 1]);
        let fa = self.params.rhs(&a.state());
        let fb = self.params.rhs(&b.state());
        let c = hermite(a.t, b.t, a.c, b.c, fa[0], fb[0], t);
        let p = hermite(a.t, b.t, a.p, b.p, fa[1], fb[1], t);
        (c, p)
    }

    pub fn write_csv<W: Write>(&self, mut w: W) -> std::io::Result<()> {
        writeln!(w, "t,C,P")?;
        for s in &self.samples {
            writeln!(w, "{:.16e},{:.16e},{:.16e}", s.t, s.c, s.p)?;
        }
        Ok(())
    }

    pub fn to_csv(&self) -> String {
        let mut buf = Vec::new();
        self.write_csv(&mut buf).expect("writing to memory");
        String::from_utf8(buf).expect("ascii output")
    }
}

fn hermite(t0: f64, t1: f64, y0: f64, y1: f64, d0: f64, d1: f64, t: f64) -> f64 {
    let h = t1 - t0;
    let s = (t - t0) / h;
    let s2 = s * s;
    let s3 = s2 * s;
    (2.0 * s3 - 3.0 * s2 + 1.0) * y0 + (s3 - 2.0 * s2 + s) * h * d0 + (-2.0 * s3 + 3.0 * s2) * y1 + (s3 - s2) * h * d1
}

/// Locates the time in `[a.t, b.t]` where component `k` equals `level`, using the
/// Hermite interpolant, then lands on it with exact steps from `a`.
fn locate_event<F>(
    it: &Integrator<4, F>,
    params: &EffectiveParams,
    a: &Sample,
    b: &Sample,
    k: usize,
    level: f64,
) -> Sample
where
    F: Fn(f64, &[f64; 4]) -> [f64; 4],
{
    let ya = a.state();
    let yb = b.state();
    let fa = params.rhs(&ya);
    let fb = params.rhs(&yb);
    let g = |t: f64| hermite(a.t, b.t, ya[k], yb[k], fa[k], fb[k], t) - level;
    let (mut lo, mut hi) = (a.t, b.t);
    let glo = g(lo);
    for _ in 0..100 {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        if g(mid).signum() == glo.signum() {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    let mut te = 0.5 * (lo + hi);
    let mut y = it.fixed_step(a.t, &ya, te - a.t);
    for _ in 0..3 {
        let d = params.rhs(&y)[k];
        if d == 0.0 {
            break;
        }
        let dt = -(y[k] - level) / d;
        if dt.abs() <= 1e-14 * te.abs().max(1.0) {
            break;
        }
        te += dt;
        y = it.fixed_step(a.t, &ya, te - a.t);
    }
    Sample::from_state(te, &y)
}

/// Integrates the slow system from the start point until escape.
pub fn integrate_forward(params: &EffectiveParams) -> Result<EffectiveTrajectory> {
    let (t0, p0) = params.start_point();
    let tol = Tolerances {
        h_max: params.max_step(),
        ..Tolerances::default()
    };
    let prm = params.clone();
    let rhs = move |_t: f64, y: &[f64; 4]| prm.rhs(y);
    let y0 = [1.0, p0, 0.0, 0.0];
    let mut it = Integrator::new(rhs, t0, y0, 1.0, tol);
    let t_max = t0 + params.horizon * t0.abs();
    let mut samples = vec![Sample::from_state(t0, &y0)];
    let mut turning = None;
    let lambda = params.lambda;
    loop {
        let prev = *samples.last().unwrap();
        let (t, y) = it.advance()?;
        let cur = Sample::from_state(t, &y);
        if turning.is_none() && (prev.c - lambda) * (cur.c - lambda) < 0.0 {
            turning = Some(locate_event(&it, params, &prev, &cur, 0, lambda).t);
        }
        let refr = prev.p < -p0 && cur.p >= -p0;
        let refl = prev.p > p0 && cur.p <= p0 && cur.c < lambda;
        if refr || refl {
            let level = if refr { -p0 } else { p0 };
            let ev = locate_event(&it, params, &prev, &cur, 1, level);
            samples.push(ev);
            return Ok(EffectiveTrajectory {
                params: params.clone(),
                samples,
                t_start: t0,
                p_start: p0,
                escape_time: ev.t,
                turning_time: turning,
                branch: if refr { Branch::Refraction } else { Branch::Reflection },
            });
        }
        if !y.iter().all(|v| v.is_finite()) {
            return Err(Error::BlowUp { t });
        }
        samples.push(cur);
        if t > t_max {
            return Err(Error::EscapeNotReached {
                t_max,
                horizon_factor: params.horizon,
            });
        }
    }
}

#[derive(Clone, Debug)]
pub struct BackwardRun {
    pub trajectory: EffectiveTrajectory,
    /// `sup_t eps |P - P~| + |C - C~|` against the forward trajectory.
    pub closeness: f64,
    /// `eps^{1/2 - 1/100}`.
    pub reference_scale: f64,
}

impl BackwardRun {
    /// Measured constant in `closeness <= K eps^{1/2-1/100}`.
    pub fn constant(&self) -> f64 {
        self.closeness / self.reference_scale
    }
}

/// Integrates the same system backward from `C~(T~) = c_plus`, `P~(T~) = P(T~) + x0`
/// to the start time of `forward`, and compares the two.
pub fn integrate_backward(forward: &EffectiveTrajectory, c_plus: f64, x0: f64) -> Result<BackwardRun> {
    let params = &forward.params;
    let eps = params.eps;
    let bound = eps.powf(-0.51);
    if x0.abs() > bound {
        return Err(Error::invalid("x0", x0, "shift exceeds eps^{-1/2-1/100}"));
    }
    if !(c_plus > 0.0) {
        return Err(Error::invalid("c_plus", c_plus, "scaling must be positive"));
    }
    let t_end = forward.escape_time;
    let t_stop = forward.t_start;
    let tol = Tolerances {
        h_max: params.max_step(),
        ..Tolerances::default()
    };
    let prm = params.clone();
    let rhs = move |_t: f64, y: &[f64; 4]| prm.rhs(y);
    let y0 = [c_plus, forward.last().p + x0, 0.0, 0.0];
    let mut it = Integrator::new(rhs, t_end, y0, -1.0, tol);
    let mut samples = vec![Sample::from_state(t_end, &y0)];
    let mut turning = None;
    loop {
        let prev = *samples.last().unwrap();
        let (t, y) = it.advance()?;
        if !y.iter().all(|v| v.is_finite()) {
            return Err(Error::BlowUp { t });
        }
        let cur = if t <= t_stop {
            let yl = it.fixed_step(prev.t, &prev.state(), t_stop - prev.t);
            Sample::from_state(t_stop, &yl)
        } else {
            Sample::from_state(t, &y)
        };
        if turning.is_none() && (prev.c - params.lambda) * (cur.c - params.lambda) < 0.0 {
            turning = Some(locate_event(&it, params, &prev, &cur, 0, params.lambda).t);
        }
        samples.push(cur);
        if cur.t <= t_stop {
            break;
        }
    }
    samples.reverse();
    let closeness = samples
        .iter()
        .map(|s| {
            let (c, p) = forward.state_at(s.t);
            eps * (p - s.p).abs() + (c - s.c).abs()
        })
        .fold(0.0, f64::max);
    let (_, p_start) = (samples[0].t, samples[0].p);
    Ok(BackwardRun {
        trajectory: EffectiveTrajectory {
            params: params.clone(),
            samples,
            t_start: t_stop,
            p_start,
            escape_time: t_end,
            turning_time: turning,
            branch: forward.branch,
        },
        closeness,
        reference_scale: eps.powf(0.49),
    })
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct RefractionIntegral {
    /// `eps int (3 lambda0 C - lambda)^2 a'/(sqrt(C) a) dt` along the trajectory.
    pub time_domain: f64,
    /// `((5-m)/4) int_1^{c_inf} (3 lambda0 c - lambda)^2 / (c^{3/2}(lambda0 c - lambda)) dc`;
    /// `None` when `lambda = lambda0` (empty interval).
    pub closed_form: Option<f64>,
}

impl RefractionIntegral {
    pub fn relative_gap(&self) -> Option<f64> {
        self.closed_form
            .map(|c| (self.time_domain - c).abs() / c.abs().max(f64::MIN_POSITIVE))
    }
}

/// Both representations of the refraction integral for a completed trajectory.
pub fn refraction_integral(traj: &EffectiveTrajectory) -> Result<RefractionIntegral> {
    let params = &traj.params;
    let time_domain = traj.last().refraction;
    let l0 = params.lambda0();
    let lambda = params.lambda;
    if (lambda - l0).abs() <= 1e-9 {
        return Ok(RefractionIntegral {
            time_domain,
            closed_form: None,
        });
    }
    let c_inf = solve_c_infinity(lambda, params.m.get())?.c_inf;
    let pole = lambda / l0;
    if (pole - 1.0) * (pole - c_inf) <= 0.0 {
        return Err(Error::SingularIntegral { pole });
    }
    let mf = params.m.as_f64();
    let integrand = |c: f64| {
        let w = 3.0 * l0 * c - lambda;
        w * w / (c.powf(1.5) * (l0 * c - lambda))
    };
    let closed = 0.25 * (5.0 - mf) * composite_gauss(integrand, 1.0, c_inf, 400);
    Ok(RefractionIntegral {
        time_domain,
        closed_form: Some(closed),
    })
}

/// `(4 lambda0^2/(1 - lambda0)) log 2`, the limit of the refraction integral at `lambda = lambda0`.
pub fn refraction_limit_at_lambda0(m: Exponent) -> f64 {
    let l0 = m.lambda0();
    4.0 * l0 * l0 / (1.0 - l0) * std::f64::consts::LN_2
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::potential::make_tanh_potential;

    fn params(m: u32, lambda: f64, eps: f64) -> EffectiveParams {
        EffectiveParams::new(m, lambda, eps, make_tanh_potential(1.0).unwrap()).unwrap()
    }

    #[test]
    fn f1_arithmetic() {
        let p = params(2, 0.3, 0.1);
        assert!((p.f1(1.0, 0.0) - 2.0 / 15.0).abs() < 1e-15);
        assert_eq!(p.f1(0.5, 3.0), 0.0);
    }

    #[test]
    fn interaction_interval_levels() {
        for (lambda, branch) in [(0.3, Branch::Refraction), (0.7, Branch::Reflection)] {
            let p = params(2, lambda, 0.1);
            let level = (1.0 - lambda) * p.t_eps();
            let teps = integrate_forward(&p).unwrap();
            let (t0, _) = teps.interaction_interval().unwrap();
            assert_eq!(t0, teps.t_start);

            let tr = integrate_forward(&p.with_start(StartRule::Flat)).unwrap();
            assert_eq!(tr.branch, branch);
            let (t0, t1) = tr.interaction_interval().unwrap();
            let (pa, pb) = (tr.state_at(t0).1, tr.state_at(t1).1);
            assert!((pa + level).abs() < 1e-8);
            let end = if branch == Branch::Refraction { level } else { -level };
            assert!((pb - end).abs() < 1e-8);
            assert!(t0 > tr.t_start && t1 < tr.escape_time && t1 > t0);
        }
        // turns round before getting that far in
        let p = params(2, 0.95, 0.1).with_start(StartRule::Flat);
        assert!(integrate_forward(&p).unwrap().interaction_interval().is_none());
    }

    #[test]
    fn f2_and_f3_vanishing() {
        let p = params(3, 0.4, 0.1);
        assert_eq!(p.f2(0.7, 1.0), 0.0);
        let q = params(2, 0.4, 0.1);
        assert!(q.f2(0.4 / (3.0 * 0.6), 2.0).abs() < 1e-16);
        assert!(p.f3(0.4, 1.0).unwrap().abs() < 1e-16);
        assert!(matches!(q.f3(1.0, 0.0), Err(Error::ContractViolation(2))));
    }

    #[test]
    fn f3_coefficient() {
        let p = params(3, 0.5, 0.1);
        let l = p.log_derivative(0.0);
        let expected = 0.5 * std::f64::consts::PI.powi(2) / 4.0 * 0.5 * l * l;
        assert!((p.f3(1.0, 0.0).unwrap() - expected).abs() < 1e-12);
    }

    #[test]
    fn lambda_tilde_residuals() {
        for m in Exponent::all() {
            let l = solve_lambda_tilde(m.get()).unwrap();
            assert!(l > m.lambda0() && l < 1.0);
            assert!(lambda_tilde_residual(m, l).abs() < 1e-12);
        }
    }

    #[test]
    fn c_inf_branches() {
        let lt = solve_lambda_tilde(2).unwrap();
        for &l in &[0.1, 0.3, 0.5, 0.62] {
            let s = solve_c_infinity(l, 2).unwrap();
            assert_eq!(s.branch, Branch::Refraction);
            assert!(s.c_inf > l);
            assert_eq!(s.kappa, 0.5);
            assert!(s.residual.abs() < 1e-12);
        }
        for &l in &[0.7, 0.9, 0.95] {
            let s = solve_c_infinity(l, 2).unwrap();
            assert_eq!(s.branch, Branch::Reflection);
            assert!(s.c_inf < l);
            assert_eq!(s.kappa, 1.0);
        }
        assert!(matches!(
            solve_c_infinity(lt + 1e-7, 2),
            Err(Error::DegenerateLambda { .. })
        ));
        assert_eq!(solve_c_infinity(0.6, 2).unwrap().c_inf, 1.0);
    }

    #[test]
    fn frozen_scaling_at_lambda0() {
        let p = params(2, 0.6, 0.2).with_start(StartRule::Flat);
        let tr = integrate_forward(&p).unwrap();
        for s in &tr.samples {
            assert!((s.c - 1.0).abs() < 1e-10);
            assert!((s.p - tr.p_start - 0.4 * (s.t - tr.t_start)).abs() < 1e-7 * s.p.abs().max(1.0));
        }
    }
}
