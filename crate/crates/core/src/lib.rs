//! Exact diffusion coefficients for finite ergodic Markov chains and Monte Carlo
//! checks of the resolvent decomposition `I_n = Lambda_n + A_n`.

// `!(x > 0.0)` rejects NaN along with nonpositive values.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod chain_model;
pub mod error;
pub mod fclt_verifier;
pub mod ks;
mod linalg;
pub mod path_simulator;
pub mod spectral;
pub mod suite;

pub use chain_model::{GeneratorModel, Observable, Tolerances};
pub use error::{FcltError, Result};
pub use spectral::SpectralData;

/// Crate version, recorded in run manifests.
pub const VERSION: &str = env!("CARGO_PKG_VERSION");
