//! Consensus-based optimization (CBO) and consensus-based sampling (CBS)
//! particle dynamics, with instruments for checking their mean-field
//! behaviour numerically.
//!
//! The crate is organised bottom-up:
//!
//! - [`objectives`]: cost functions carrying growth certificates.
//! - [`linalg`]: small symmetric-matrix kernels (square roots, norms,
//!   PSD projection) and the matrix inequalities used by the mean-field
//!   analysis.
//! - [`measures`]: empirical ensembles, Gibbs reweighting, weighted mean and
//!   covariance, and the second-moment bounds for reweighted measures.
//! - [`dynamics`]: Euler–Maruyama steppers for both particle systems.
//! - [`diagnostics`]: weak Fokker–Planck residuals, Wasserstein distances,
//!   stability ratios and moment monitors.
//! - [`cli`]: the batch experiment front-end behind the `consensus-dyn`
//!   binary.

pub mod cli;
pub mod diagnostics;
pub mod dynamics;
mod error;
pub mod linalg;
pub mod measures;
pub mod noise;
pub mod objectives;

pub use error::{Error, Result};
