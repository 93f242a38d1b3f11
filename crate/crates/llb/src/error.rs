//! Error type shared across the crate.

use thiserror::Error;

/// Everything that can go wrong outside of config parsing (which reports
/// per-field errors through [`crate::config::FieldError`] instead).
#[derive(Debug, Error)]
pub enum LlbError {
    /// Grid construction rejected the requested geometry.
    #[error("invalid grid: {0}")]
    InvalidGrid(String),

    /// Two fields that must live on the same grid do not.
    #[error("grid mismatch: {0}")]
    GridMismatch(String),

    /// A parameter was outside its documented range.
    #[error("invalid parameter {name}: {message}")]
    InvalidParameter { name: String, message: String },

    /// A trajectory produced a non-finite value or exceeded the sup-norm
    /// ceiling past the substepping budget. Carries the time of failure.
    #[error("trajectory blow-up at t = {t:.6}: {message}")]
    Blowup { t: f64, message: String },

    /// An operation needed data the caller did not provide (for example an
    /// empty ensemble or an empty mode list).
    #[error("empty input: {0}")]
    EmptyInput(String),

    /// Writing a report to disk failed.
    #[error("io error: {0}")]
    Io(#[from] std::io::Error),
}

impl LlbError {
    pub fn invalid_parameter(name: &str, message: impl Into<String>) -> Self {
        LlbError::InvalidParameter {
            name: name.to_string(),
            message: message.into(),
        }
    }
}
