use thiserror::Error;

/// Errors produced by the estimation library.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum PlseError {
    #[error("domain error: {0}")]
    Domain(String),

    #[error("dimension mismatch: {what} (expected {expected}, got {got})")]
    DimensionMismatch {
        what: &'static str,
        expected: usize,
        got: usize,
    },

    #[error("invalid parameter `{field}`: {reason}")]
    InvalidParameter { field: String, reason: String },

    #[error("input is not sorted: {0}")]
    Unsorted(&'static str),

    #[error("singular matrix: {0}")]
    Singular(String),

    #[error("solver diverged (non-finite iterate) with step size {step}")]
    Divergence { step: f64 },

    #[error("i/o error: {0}")]
    Io(String),

    #[error("parse error: {0}")]
    Parse(String),
}

impl PlseError {
    pub(crate) fn domain(msg: impl Into<String>) -> Self {
        PlseError::Domain(msg.into())
    }

    pub(crate) fn param(field: impl Into<String>, reason: impl Into<String>) -> Self {
        PlseError::InvalidParameter {
            field: field.into(),
            reason: reason.into(),
        }
    }
}

impl From<std::io::Error> for PlseError {
    fn from(e: std::io::Error) -> Self {
        PlseError::Io(e.to_string())
    }
}

impl From<serde_json::Error> for PlseError {
    fn from(e: serde_json::Error) -> Self {
        PlseError::Parse(e.to_string())
    }
}

pub type Result<T> = std::result::Result<T, PlseError>;
