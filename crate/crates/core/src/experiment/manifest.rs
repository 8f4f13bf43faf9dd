//! Run manifests, stored as TOML.

use std::path::Path;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::effective::{integrate_forward, EffectiveParams, StartRule};
use crate::error::{Error, Result};
use crate::potential::{Potential, Profile};
use crate::soliton::Exponent;
use crate::spectral::{Grid, Scheme, Sponge, StepperConfig};

/// Flatness of `a` at the initial soliton centre.
pub const START_FLATNESS: f64 = 1e-12;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum PotentialKind {
    Tanh,
    Constant,
}

/// Every parameter a run depends on. `None` for `x0` and the window bounds means
/// "derive from the effective dynamics".
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunManifest {
    pub m: u32,
    pub lambda: f64,
    pub eps: f64,
    pub potential: PotentialKind,
    pub gamma: f64,
    pub a_value: f64,
    pub mirrored: bool,
    pub n: usize,
    pub length: f64,
    pub dt: f64,
    pub dealias: f64,
    pub scheme: Scheme,
    pub sponge: bool,
    pub sponge_width: f64,
    pub sponge_strength: f64,
    pub alias_threshold: f64,
    pub alias_check_every: usize,
    pub x0: Option<f64>,
    pub window_delay: f64,
    pub window_length: f64,
    pub window_start: Option<f64>,
    pub window_end: Option<f64>,
    pub sample_every: f64,
    pub flux_every: usize,
    pub snapshot_every: f64,
    pub reentry_threshold: f64,
    pub edge_width: f64,
    pub virial_scale: f64,
    pub code_version: String,
    pub input_hash: Option<String>,
}

impl Default for RunManifest {
    fn default() -> Self {
        RunManifest {
            m: 2,
            lambda: 0.3,
            eps: 0.1,
            potential: PotentialKind::Tanh,
            gamma: 1.0,
            a_value: 1.0,
            mirrored: false,
            n: 8192,
            length: 600.0,
            dt: 0.005,
            dealias: 2.0 / 3.0,
            scheme: Scheme::Etdrk4,
            sponge: false,
            sponge_width: 20.0,
            sponge_strength: 1.0,
            alias_threshold: 1e-8,
            alias_check_every: 100,
            x0: None,
            window_delay: 10.0,
            window_length: 100.0,
            window_start: None,
            window_end: None,
            sample_every: 0.5,
            flux_every: 10,
            snapshot_every: 0.0,
            reentry_threshold: 1e-5,
            edge_width: 20.0,
            virial_scale: 10.0,
            code_version: env!("CARGO_PKG_VERSION").to_string(),
            input_hash: None,
        }
    }
}

impl RunManifest {
    /// Manifest for `(m, lambda, eps)` with the domain sized from the effective
    /// dynamics so the soliton never reaches the seam.
    pub fn scenario(m: u32, lambda: f64, eps: f64) -> Result<Self> {
        let mut man = RunManifest {
            m,
            lambda,
            eps,
            ..Default::default()
        };
        man.autosize()?;
        Ok(man)
    }

    /// Chooses `length` and `n` (grid spacing near 0.073) from the start position and
    /// the predicted position at the end of the window.
    pub fn autosize(&mut self) -> Result<()> {
        let plan = self.plan()?;
        let c_end = plan.c_end.max(0.05);
        let reach = plan.x0.abs().max(plan.x_end.abs()) + 40.0 / c_end.sqrt() + 40.0;
        let length = (2.0 * reach / 100.0).ceil() * 100.0;
        let n = (length / 0.075).ceil() as usize;
        self.length = length;
        self.n = n.next_power_of_two();
        Ok(())
    }

    pub fn exponent(&self) -> Result<Exponent> {
        Exponent::new(self.m)
    }

    pub fn potential(&self) -> Result<Potential> {
        let p = match self.potential {
            PotentialKind::Tanh => crate::potential::make_tanh_potential(self.gamma)?,
            PotentialKind::Constant => Potential::new(Profile::Constant { value: self.a_value }),
        };
        Ok(if self.mirrored { p.mirrored() } else { p })
    }

    pub fn grid(&self) -> Result<Grid> {
        Grid::new(self.n, self.length)
    }

    pub fn stepper_config(&self) -> Result<StepperConfig> {
        let mut cfg = StepperConfig::new(self.exponent()?, self.lambda, self.eps, self.potential()?, self.dt);
        cfg.dealias = self.dealias;
        cfg.scheme = self.scheme;
        cfg.sponge = self.sponge.then_some(Sponge {
            width: self.sponge_width,
            strength: self.sponge_strength,
        });
        cfg.alias_threshold = self.alias_threshold;
        cfg.alias_check_every = self.alias_check_every;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        self.exponent()?;
        if !(0.0..1.0).contains(&self.lambda) {
            return Err(Error::invalid("lambda", self.lambda, "must lie in [0, 1)"));
        }
        if !(self.eps > 0.0 && self.eps <= 1.0) {
            return Err(Error::invalid("eps", self.eps, "must lie in (0, 1]"));
        }
        if !(self.sample_every > 0.0) {
            return Err(Error::invalid("sample_every", self.sample_every, "must be positive"));
        }
        if self.flux_every == 0 {
            return Err(Error::invalid("flux_every", 0.0, "must be at least 1"));
        }
        if !(self.window_length >= 0.0) {
            return Err(Error::invalid(
                "window_length",
                self.window_length,
                "must be non-negative",
            ));
        }
        self.grid()?;
        self.stepper_config()?;
        Ok(())
    }

    /// Start position, start time and window derived from the manifest and the
    /// effective dynamics.
    pub fn plan(&self) -> Result<RunPlan> {
        self.validate_physics()?;
        let potential = self.potential()?;
        self.exponent()?;
        let speed = 1.0 - self.lambda;
        let ode = if potential.is_constant() {
            None
        } else {
            let params = EffectiveParams::new(self.m, self.lambda, self.eps, potential)?.with_start(StartRule::Flat);
            Some(integrate_forward(&params)?)
        };
        let x0 = match (self.x0, &ode) {
            (Some(x), _) => x,
            (None, Some(tr)) => tr.p_start,
            (None, None) => {
                return Err(Error::Manifest(
                    "x0 = auto needs a non-constant potential; set x0 explicitly".into(),
                ))
            }
        };
        if potential.a_prime(self.eps * x0).abs() > START_FLATNESS * (1.0 + 1e-6) {
            return Err(Error::invalid("x0", x0, "potential is not flat at the initial soliton"));
        }
        let t0 = if speed > 0.0 { x0 / speed } else { 0.0 };
        let escape = ode.as_ref().map(|tr| tr.escape_time);
        let window_start = match (self.window_start, escape) {
            (Some(t), _) => t,
            (None, Some(te)) => te + self.window_delay,
            (None, None) => {
                return Err(Error::Manifest(
                    "window_start = auto needs a non-constant potential; set it explicitly".into(),
                ))
            }
        };
        let window_end = self.window_end.unwrap_or(window_start + self.window_length);
        if window_end < window_start || window_start < t0 {
            return Err(Error::Manifest(format!(
                "window [{window_start}, {window_end}] does not lie after the start time {t0}"
            )));
        }
        let (c_end, x_end) = match &ode {
            Some(tr) => {
                let last = tr.last();
                let c = last.c;
                (c, last.p + (c - self.lambda) * (window_end - last.t))
            }
            None => (1.0, x0 + speed * (window_end - t0)),
        };
        Ok(RunPlan {
            x0,
            t0,
            window: (window_start, window_end),
            escape_time: escape,
            c_end,
            x_end,
            ode,
        })
    }

    fn validate_physics(&self) -> Result<()> {
        self.exponent()?;
        if !(0.0..1.0).contains(&self.lambda) {
            return Err(Error::invalid("lambda", self.lambda, "must lie in [0, 1)"));
        }
        if !(self.eps > 0.0 && self.eps <= 1.0) {
            return Err(Error::invalid("eps", self.eps, "must lie in (0, 1]"));
        }
        Ok(())
    }

    /// Applies `key=value` overrides in order. Values are TOML literals; anything that
    /// does not parse as one is taken as a string, and `auto` clears an optional key.
    pub fn apply_overrides<S: AsRef<str>>(&mut self, overrides: &[S]) -> Result<()> {
        let mut table = toml::Table::try_from(&*self).map_err(|e| Error::Manifest(e.to_string()))?;
        for o in overrides {
            let o = o.as_ref();
            let (k, v) = o
                .split_once('=')
                .ok_or_else(|| Error::Manifest(format!("override '{o}' is not key=value")))?;
            let (k, v) = (k.trim(), v.trim());
            if v == "auto" {
                table.remove(k);
                continue;
            }
            let value = toml::from_str::<toml::Table>(&format!("v = {v}"))
                .ok()
                .and_then(|mut t| t.remove("v"))
                .unwrap_or_else(|| toml::Value::String(v.to_string()));
            table.insert(k.to_string(), value);
            *self = table
                .clone()
                .try_into()
                .map_err(|e| Error::Manifest(format!("override {k} = {v}: {e}")))?;
        }
        Ok(())
    }

    /// Canonical TOML text, keys in declaration order. Floats are written in their
    /// shortest round-trip form, so parsing the text gives back the same manifest.
    pub fn to_text(&self) -> String {
        let body = toml::to_string(self).expect("manifest serializes");
        format!("# gkdv run manifest\n{body}")
    }

    pub fn from_text(text: &str) -> Result<Self> {
        toml::from_str(text).map_err(|e| Error::Manifest(e.to_string()))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_text(&text)
    }

    /// SHA-256 of the canonical text, hex encoded.
    pub fn hash(&self) -> String {
        hex::encode(Sha256::digest(self.to_text().as_bytes()))
    }

    pub fn short_hash(&self) -> String {
        self.hash()[..12].to_string()
    }
}

/// SHA-256 of a byte string, hex encoded.
pub fn hash_bytes(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}

/// Derived quantities of a manifest.
#[derive(Clone, Debug)]
pub struct RunPlan {
    pub x0: f64,
    pub t0: f64,
    pub window: (f64, f64),
    pub escape_time: Option<f64>,
    /// Predicted scaling and position at the end of the window.
    pub c_end: f64,
    pub x_end: f64,
    pub ode: Option<crate::effective::EffectiveTrajectory>,
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn text_roundtrip_is_exact() {
        let m = RunManifest {
            lambda: 0.1 + 0.2,
            x0: Some(-141.59999999999),
            window_end: Some(1234.5),
            input_hash: Some("abc".into()),
            ..Default::default()
        };
        let back = RunManifest::from_text(&m.to_text()).unwrap();
        assert_eq!(back, m);
        assert_eq!(back.hash(), m.hash());
    }

    #[test]
    fn overrides_and_errors() {
        let mut m = RunManifest::default();
        m.apply_overrides(&["eps=0.05", "sponge=true", "x0=auto"]).unwrap();
        assert_eq!(m.eps, 0.05);
        assert!(m.sponge);
        assert!(m.apply_overrides(&["bogus=1"]).is_err());
        assert!(m.apply_overrides(&["eps"]).is_err());
        assert!(m.apply_overrides(&["n=abc"]).is_err());
        assert!(RunManifest::from_text("eps 0.1").is_err());
    }

    #[test]
    fn hash_changes_with_content() {
        let a = RunManifest::default();
        let mut b = a.clone();
        b.dt = 0.0025;
        assert_ne!(a.hash(), b.hash());
        assert_eq!(a.hash().len(), 64);
    }

    #[test]
    fn plan_starts_on_flat_ground() {
        let m = RunManifest::scenario(2, 0.3, 0.2).unwrap();
        let plan = m.plan().unwrap();
        let pot = m.potential().unwrap();
        assert!(pot.a_prime(0.2 * plan.x0).abs() <= START_FLATNESS * (1.0 + 1e-6));
        assert!(plan.window.0 > plan.escape_time.unwrap());
        assert!(m.length / 2.0 > plan.x_end + 40.0);
        assert!(m.length / 2.0 > -plan.x0 + 40.0);
    }
}
