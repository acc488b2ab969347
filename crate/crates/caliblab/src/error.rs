//! Error taxonomy shared across the crate.
//!
//! The CLI maps these onto process exit codes: validation errors exit 2,
//! capacity errors exit 3, internal invariant breaches exit 4.

use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    /// Malformed or out-of-contract input (bad JSON, value out of range,
    /// length mismatch, unknown name).
    #[error("validation: {0}")]
    Validation(String),

    /// A request that would exceed a configured enumeration or search cap.
    #[error("capacity: {0}")]
    Capacity(String),

    /// A transcript whose outcomes are impossible under the distribution it
    /// is paired with (a conditional of 0 on an observed 1, or vice versa).
    #[error("inconsistent path: {0}")]
    Inconsistency(String),

    /// An internal invariant failed (e.g. a measure value escaped its range
    /// by more than the numerical tolerance). Always a bug.
    #[error("internal invariant breach: {0}")]
    Internal(String),
}

pub type Result<T> = std::result::Result<T, Error>;

impl Error {
    pub fn validation(msg: impl Into<String>) -> Self {
        Error::Validation(msg.into())
    }

    pub fn capacity(msg: impl Into<String>) -> Self {
        Error::Capacity(msg.into())
    }
}
