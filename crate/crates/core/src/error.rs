use thiserror::Error;

/// Errors produced by the channel toolkit.
#[derive(Debug, Error)]
pub enum Error {
    #[error("shape mismatch: {0}")]
    Shape(String),

    #[error("dimension {requested} exceeds the configured guard of {limit} ({what})")]
    DimensionLimit {
        what: &'static str,
        requested: usize,
        limit: usize,
    },

    #[error("invariant violated: {0}")]
    Invariant(String),

    #[error(
        "operator leaks outside the support of the weight operator (relative leak {leak:.3e}, tolerance {tol:.1e})"
    )]
    Support { leak: f64, tol: f64 },

    #[error("invalid parameter: {0}")]
    Parameter(String),

    #[error("precondition failed: {0}")]
    Precondition(String),

    #[error("multiplicativity exponent undefined: single-copy 2-norm estimate {0} is not below 1")]
    ExponentUndefined(f64),

    #[error("malformed input: {0}")]
    Json(#[from] serde_json::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
