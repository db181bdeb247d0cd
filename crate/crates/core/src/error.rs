use std::path::PathBuf;

use thiserror::Error;

/// Errors produced anywhere in the library.
#[derive(Debug, Error)]
pub enum Error {
    /// A caller-supplied value violates an operation's precondition.
    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    /// The input is well-formed but outside the mathematical domain of the
    /// operation (for example a depolarized Stokes vector handed to the
    /// Stokes-to-Jones conversion).
    #[error("domain error: {0}")]
    Domain(String),

    /// An identity the library relies on did not hold numerically.
    #[error("internal consistency check failed: {0}")]
    InternalConsistency(String),

    /// A cipher matrix produced a depolarized output.
    #[error("cipher integrity violated: {0}")]
    CipherIntegrity(String),

    /// An experiment configuration is inconsistent.
    #[error("configuration error: {0}")]
    Config(String),

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("{path}: malformed data: {message}")]
    Parse { path: PathBuf, message: String },
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn invalid(msg: impl Into<String>) -> Error {
    Error::InvalidArgument(msg.into())
}
