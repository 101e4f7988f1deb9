use thiserror::Error;

use crate::covmodel::ValidationReport;

/// Errors produced anywhere in the library.
///
/// The variants are grouped so a front end can map them onto distinct exit
/// statuses: structural/parse problems, invalid models, numerical failures and
/// unsupported algorithm/option combinations.
#[derive(Debug, Error)]
pub enum Error {
    /// Declared dimensions disagree with the data actually supplied.
    #[error("shape error: {0}")]
    Shape(String),

    /// A model document or CSV file could not be parsed.
    #[error("parse error: {0}")]
    Parse(String),

    /// The model parsed but violates one or more invariants.
    #[error("invalid model: {0}")]
    InvalidModel(ValidationReport),

    /// Cholesky factorization hit a non-positive pivot (0-based index).
    #[error("matrix is not positive definite (failing pivot {pivot})")]
    NotPositiveDefinite { pivot: usize },

    /// A quantity that must be non-negative came out meaningfully negative.
    #[error("numerical consistency failure: {quantity} = {value:e}")]
    NumericalConsistency { quantity: &'static str, value: f64 },

    /// An argument lies outside the domain of the requested operation.
    #[error("domain error: {0}")]
    Domain(String),

    /// The requested algorithm cannot honour the requested configuration.
    #[error("unsupported: {0}")]
    Capability(String),

    /// Covariance estimation from samples failed.
    #[error("estimation failed: {0}")]
    Estimation(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;

impl From<csv::Error> for Error {
    fn from(e: csv::Error) -> Self {
        Error::Parse(e.to_string())
    }
}
