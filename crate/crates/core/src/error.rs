use thiserror::Error;

/// Errors produced by the analytic and simulation routines.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    /// Matrix shapes are incompatible with the requested operation.
    #[error("dimension mismatch: {0}")]
    Dimension(String),

    /// A Kronecker-expanded state space would exceed the configured cap.
    #[error("state space of dimension {requested} exceeds the cap of {cap}; use the scalar path instead")]
    Capacity { requested: u128, cap: usize },

    /// A numeric routine produced non-finite values, hit a singular system,
    /// or failed to converge.
    #[error("numeric failure: {0}")]
    Numeric(String),

    /// Inputs violate a documented precondition.
    #[error("invalid input: {0}")]
    Validation(String),
}

pub type Result<T> = std::result::Result<T, Error>;
