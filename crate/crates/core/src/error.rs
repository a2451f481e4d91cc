use thiserror::Error;

/// Errors raised by the workbench.
#[derive(Debug, Error)]
pub enum Error {
    /// Caller passed inconsistent or out-of-range arguments.
    #[error("invalid argument: {0}")]
    Argument(String),

    /// A kernel was evaluated outside the region where it is nonnegative.
    #[error("kernel domain error: {0}")]
    Domain(String),

    /// Input data violates a structural invariant (symmetry, sign, normalization).
    #[error("validation failed: {0}")]
    Validation(String),

    /// An exhaustive computation would exceed its enumeration budget.
    #[error("enumeration budget exceeded: {needed} candidates > limit {limit} ({what})")]
    Budget {
        what: String,
        needed: u128,
        limit: u128,
    },

    /// Recorded data contradicts a property the quantity must satisfy.
    #[error("data error: {0}")]
    Data(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
