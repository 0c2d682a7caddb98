//! Error type shared across the crate.

use thiserror::Error;

/// Crate-wide result alias.
pub type Result<T> = std::result::Result<T, Error>;

/// Errors raised by model construction, sampling, and the benchmark harness.
#[derive(Debug, Error)]
pub enum Error {
    /// An argument violated a documented precondition (wrong length, value
    /// out of range, malformed region, ...).
    #[error("domain error: {0}")]
    Domain(String),

    /// A numerical operation failed beyond recovery (factorization that does
    /// not succeed even after the jitter ladder, non-finite intermediate).
    #[error("numerical error: {0}")]
    Numerical(String),
}

impl Error {
    pub(crate) fn domain(msg: impl Into<String>) -> Self {
        Error::Domain(msg.into())
    }

    pub(crate) fn numerical(msg: impl Into<String>) -> Self {
        Error::Numerical(msg.into())
    }
}
