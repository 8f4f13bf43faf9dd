//! Reproducible scenarios: manifests, runs, sweeps, root tables and the self-test.

pub mod manifest;
pub mod roots;
pub mod run;
pub mod selftest;
pub mod sweep;

pub use manifest::{hash_bytes, PotentialKind, RunManifest, RunPlan};
pub use roots::{parse_lambda_grid, roots_csv, roots_table, RootsRow};
pub use run::{incoming_soliton, reverse, reverse_from, simulate, Drift, ReverseOutput, RunOutput, SeriesRow};
pub use selftest::{selftest, Check, SelftestOptions, SelftestReport};
pub use sweep::{fit_exponent, sweep, ExponentFit, SweepResult, SweepRow};
