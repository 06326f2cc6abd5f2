use thiserror::Error;

/// Errors raised by the toolkit.
#[derive(Debug, Error)]
pub enum Error {
    #[error("dimension mismatch: {0}")]
    Dimension(String),
    #[error("non-invertible gain")]
    NonInvertible,
    #[error("certificate weight not positive definite (min eigenvalue {0:e})")]
    NotPositiveDefinite(f64),
    #[error("singular B^T M B: rank {rank} of {dim}")]
    Singular { rank: usize, dim: usize },
    #[error("missing interface matrix: {0}")]
    MissingInterface(&'static str),
    #[error("max sigma^-1 not concave: sigma {index} has exponent {p} > 1")]
    NotConcave { index: usize, p: f64 },
    #[error("horizon mismatch: {0} vs {1}")]
    HorizonMismatch(usize, usize),
    #[error("horizon exhausted at step {0}")]
    HorizonExhausted(usize),
    #[error("empty safe set")]
    EmptySafeSet,
    #[error("kernel requires per-dimension independent noise")]
    NoiseNotDiagonal,
    #[error("unverified gain matrix: {0}")]
    Unverified(String),
    #[error("precondition violated: {0}")]
    Precondition(String),
    #[error("scenario: {0}")]
    Scenario(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
