//! Error type shared across the crate.

use thiserror::Error;

/// Errors produced by graph loading, validation, and numeric routines.
#[derive(Debug, Error)]
pub enum Error {
    /// I/O failure while reading or writing an artifact.
    #[error("io error on {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },

    /// A text input could not be parsed.
    #[error("parse error in {path} at line {line}: {message}")]
    Parse {
        path: String,
        line: usize,
        message: String,
    },

    /// Input violated a structural precondition (bad index, bad config field,
    /// inconsistent shapes at the data level).
    #[error("validation error: {0}")]
    Validation(String),

    /// A numeric routine failed (NaN, no convergence, degenerate input).
    #[error("numeric error: {0}")]
    Numeric(String),
}

impl Error {
    pub fn validation(msg: impl Into<String>) -> Self {
        Error::Validation(msg.into())
    }

    pub fn numeric(msg: impl Into<String>) -> Self {
        Error::Numeric(msg.into())
    }
}

pub type Result<T> = std::result::Result<T, Error>;
