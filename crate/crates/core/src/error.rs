//! Crate-wide error type.

use thiserror::Error;

/// Errors produced by the simulation, tomography, and metric routines.
#[derive(Debug, Error)]
pub enum Error {
    /// An argument violated a precondition (range, finiteness, size).
    #[error("invalid input: {0}")]
    InvalidInput(String),

    /// An operator that must be Hermitian was not, within tolerance.
    #[error("operator is not Hermitian: max |A - A^dag| entry = {max_dev:.3e}")]
    NotHermitian { max_dev: f64 },

    /// An operator that must be positive semidefinite had a significantly
    /// negative eigenvalue.
    #[error("operator is not positive semidefinite: min eigenvalue = {min_eig:.3e}")]
    NotPsd { min_eig: f64 },

    /// Mismatched dimensions between related values.
    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),

    /// An iterative routine produced a non-finite quantity.
    #[error("numerical failure at iteration {iteration}: {reason}")]
    NumericalFailure { iteration: usize, reason: String },

    /// POVM fidelity is undefined for the given operands.
    #[error("fidelity undefined: {0}")]
    UndefinedFidelity(String),

    /// A serialized artifact did not match its schema.
    #[error("parse error at {location}: {reason}")]
    Parse { location: String, reason: String },

    #[error("I/O error: {0}")]
    Io(#[from] std::io::Error),

    #[error("CSV error: {0}")]
    Csv(#[from] csv::Error),

    #[error("JSON error: {0}")]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
