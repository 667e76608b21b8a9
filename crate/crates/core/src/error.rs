use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = DemixError> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum DemixError {
    #[error("dimension mismatch in {context}: expected {expected}, found {found}")]
    Dimension { context: &'static str, expected: String, found: String },

    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("{path}: line {line}: {message}")]
    Parse { path: PathBuf, line: usize, message: String },

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("numerical failure: {0}")]
    Numerical(String),

    #[error("degenerate support: smallest Gram eigenvalue {min_eigenvalue:e} (largest {max_eigenvalue:e})")]
    DegenerateSupport { min_eigenvalue: f64, max_eigenvalue: f64 },

    #[error("exact enumeration needs {count} supports, above the limit of {limit}; use Monte Carlo sampling instead")]
    TooManySupports { count: u128, limit: u128 },
}

impl DemixError {
    pub(crate) fn dims(context: &'static str, expected: impl std::fmt::Display, found: impl std::fmt::Display) -> Self {
        DemixError::Dimension { context, expected: expected.to_string(), found: found.to_string() }
    }

    pub(crate) fn invalid(msg: impl Into<String>) -> Self {
        DemixError::InvalidInput(msg.into())
    }
}
