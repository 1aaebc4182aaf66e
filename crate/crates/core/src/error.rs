use thiserror::Error;

/// Errors produced by the toolkit.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("invalid configuration: {0}")]
    InvalidConfig(String),
    #[error("candidate set is empty")]
    EmptyCandidates,
    #[error("invalid environment spec: {0}")]
    InvalidSpec(String),
    #[error("invalid granularity {0}: need at least 2 values per dimension")]
    InvalidGranularity(usize),
    #[error("index {index} out of range for size {size}")]
    IndexOutOfRange { index: usize, size: usize },
    #[error("step called on a finished episode without reset")]
    StepAfterDone,
    #[error("shape mismatch: expected {expected}, got {got}")]
    ShapeMismatch { expected: usize, got: usize },
    #[error("subset enumeration too large: C({n}, {k}) with n > {limit}")]
    EnumerationTooLarge { n: usize, k: usize, limit: usize },
    #[error("invalid parameters: {0}")]
    InvalidParams(String),
    #[error("fixed-point iteration did not converge within {iters} iterations (last step {last_step:e})")]
    NonConvergence { iters: usize, last_step: f64 },
    #[error("ratio undefined: maximum value {0} is not positive")]
    NonPositiveMax(f64),
    #[error("checkpoint: {0}")]
    Checkpoint(String),
}

pub type Result<T> = std::result::Result<T, Error>;
