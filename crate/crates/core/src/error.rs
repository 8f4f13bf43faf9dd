use std::path::PathBuf;

use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("unsupported nonlinearity exponent m = {0} (expected 2, 3 or 4)")]
    UnsupportedExponent(u32),

    #[error("invalid parameter {name} = {value}: {reason}")]
    InvalidParameter {
        name: &'static str,
        value: f64,
        reason: &'static str,
    },

    #[error("root bracket [{lo}, {hi}] does not change sign (residuals {f_lo:e}, {f_hi:e})")]
    BracketFailure { lo: f64, hi: f64, f_lo: f64, f_hi: f64 },

    #[error("lambda = {lambda} is within {distance:e} of the threshold {threshold} (degenerate regime)")]
    DegenerateLambda { lambda: f64, threshold: f64, distance: f64 },

    #[error("ODE step size underflow at t = {t} (h = {h:e})")]
    StepUnderflow { t: f64, h: f64 },

    #[error("escape not reached before t = {t_max} (horizon {horizon_factor} x T_eps)")]
    EscapeNotReached { t_max: f64, horizon_factor: f64 },

    #[error("refraction integral is singular: scaling crosses lambda/lambda0 = {pole}")]
    SingularIntegral { pole: f64 },

    #[error("non-finite field value at t = {t}")]
    BlowUp { t: f64 },

    #[error("aliasing alarm at t = {t}: top-band spectral energy fraction {fraction:e}")]
    AliasingAlarm { t: f64, fraction: f64 },

    #[error("Newton iteration did not converge in {iterations} iterations (last step {last_step:e})")]
    NewtonNonConvergence { iterations: usize, last_step: f64 },

    #[error("Newton iterate produced non-positive scaling c = {c}")]
    NegativeScaling { c: f64 },

    #[error("decomposition failed at t = {t}: {source}")]
    TrackFailure {
        t: f64,
        #[source]
        source: Box<Error>,
    },

    #[error("terminal window contaminated by periodic re-entry at t = {t} (edge mass fraction {fraction:e})")]
    Reentry { t: f64, fraction: f64 },

    #[error("terminal window too short: {length} < {required}")]
    WindowTooShort { length: f64, required: f64 },

    #[error("f2 solvability mismatch: recovered {recovered} vs closed form {expected}")]
    SolvabilityMismatch { recovered: f64, expected: f64 },

    #[error("truncation too small: left limit not flat (variation {variation:e})")]
    TruncationTooSmall { variation: f64 },

    #[error("f3 is defined for m = 3 only (got m = {0})")]
    ContractViolation(u32),

    #[error("singular linear system at row {0}")]
    SingularSystem(usize),

    #[error("snapshot: bad magic bytes {found:?}")]
    BadMagic { found: [u8; 4] },

    #[error("snapshot: version mismatch (expected {expected}, found {found})")]
    VersionMismatch { expected: u32, found: u32 },

    #[error("snapshot: length mismatch (header says {expected} samples, payload holds {found})")]
    LengthMismatch { expected: usize, found: usize },

    #[error("manifest: {0}")]
    Manifest(String),

    #[error("I/O error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

impl Error {
    pub(crate) fn invalid(name: &'static str, value: f64, reason: &'static str) -> Self {
        Error::InvalidParameter { name, value, reason }
    }

    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    /// True for failures caused by bad input rather than by the numerics.
    pub fn is_input_error(&self) -> bool {
        matches!(
            self,
            Error::UnsupportedExponent(_)
                | Error::InvalidParameter { .. }
                | Error::DegenerateLambda { .. }
                | Error::ContractViolation(_)
                | Error::BadMagic { .. }
                | Error::VersionMismatch { .. }
                | Error::LengthMismatch { .. }
                | Error::Manifest(_)
                | Error::Io { .. }
        )
    }
}
