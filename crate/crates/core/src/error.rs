//! Crate-wide error type.

use thiserror::Error;

/// Errors produced by the simulation, solver and pipeline layers.
#[derive(Debug, Error)]
pub enum Error {
    /// An argument fell outside its mathematical domain.
    #[error("domain error: {0}")]
    Domain(String),

    /// Invalid or inconsistent configuration.
    #[error("config error: {0}")]
    Config(String),

    /// Matrix/vector shapes do not line up.
    #[error("dimension mismatch: {0}")]
    Dim(String),

    /// The eigenvalue tail past the requested cut has zero trace.
    #[error("empty tail: tr(lambda tail past k={k}) = 0")]
    EmptyTail { k: usize },

    /// A regularised denominator is exactly zero (event D).
    #[error("zero denominator: {0}")]
    ZeroDenominator(String),

    /// The gamma = 0 Gram matrix is rank deficient beyond tolerance.
    #[error("singular Gram: min eigenvalue {min_eig:e} below tolerance {tol:e}")]
    SingularGram { min_eig: f64, tol: f64 },

    /// A seed-tree label was registered twice.
    #[error("duplicate seed label: {0}")]
    DuplicateLabel(String),

    /// Input file problems (CSV ingestion, config files).
    #[error("parse error at line {line}: {msg}")]
    Parse { line: usize, msg: String },

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
