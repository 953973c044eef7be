//! Simulation and diagnostics for linear regression onto random functional
//! covariates.
//!
//! Covariate vectors arise from evaluating p random functions at n hidden
//! latent locations plus additive noise; responses depend on the latent
//! locations only. The crate simulates that generative model exactly through
//! its Karhunen-Loeve representation, fits scaled ridge / ridge-less
//! regression in dual form, computes the exact conditional-expectation
//! decomposition of the prediction error (B, V, S1-S3) with concentration
//! diagnostics, and drives the convergence-rate and benign-overfitting
//! experiment suites.
//!
//! The numerical core is generic over the scalar type (via `num-traits`);
//! the aliases below fix f64, which is what the CLI and presets use.

pub mod error;
pub mod experiments;
pub mod linalg;
pub mod lmm;
pub mod quad;
pub mod ridge;
pub mod risk;
pub mod rng;
pub mod scalar;
pub mod spectrum;

pub use error::{Error, Result};
pub use scalar::Real;

/// f64 dense matrix.
pub type Matrix = linalg::Mat<f64>;
/// f64 eigenvalue spectrum.
pub type Spectrum = spectrum::EigenSpectrum<f64>;
/// f64 regression target.
pub type Target = lmm::TargetSpec<f64>;
/// f64 generating configuration.
pub type ModelConfig = lmm::LmmConfig<f64>;
/// f64 dataset realization.
pub type Dataset = lmm::LmmDataset<f64>;
/// f64 ridge solution.
pub type Solution = ridge::RidgeSolution<f64>;
/// f64 risk decomposition.
pub type Decomposition = risk::RiskDecomposition<f64>;
/// f64 sweep output.
pub type Sweep = experiments::SweepResult<f64>;
