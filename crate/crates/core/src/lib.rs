//! Numerics for slowly varying gKdV solitons: ground states, potentials, the
//! slow modulation ODE, a pseudo-spectral PDE solver, modulation tracking,
//! the first-order profile correction and virial-type diagnostics.

// `!(x > 0.0)` is how NaN gets rejected throughout
#![allow(clippy::neg_cmp_op_on_partial_ord, clippy::needless_range_loop)]

pub mod banded;
pub mod correction;
pub mod diagnostics;
pub mod effective;
pub mod error;
pub mod experiment;
pub mod fit;
pub mod modulation;
pub mod ode;
pub mod potential;
pub mod quadrature;
pub mod roots;
pub mod soliton;
pub mod spectral;

pub use error::{Error, Result};
pub use potential::{make_tanh_potential, Potential, Profile};
pub use soliton::{ground_state, lambda_q, scaled_soliton, soliton_integrals, Exponent, ScaledSoliton};
