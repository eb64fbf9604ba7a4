use thiserror::Error;

/// Errors produced by the numerical kernel, generators and experiment layer.
#[derive(Debug, Error)]
pub enum Error {
    #[error("dimension mismatch: {0}")]
    Dimension(String),

    #[error("matrix is not positive definite (pivot {pivot} at index {index})")]
    NotPositiveDefinite { index: usize, pivot: f64 },

    #[error("eigenvalue iteration failed to converge")]
    Eigen,

    #[error("invalid Zadoff-Chu root {root} for length {len}: gcd must be 1")]
    InvalidRoot { root: usize, len: usize },

    #[error("training matrix is rank deficient")]
    SingularTraining,

    #[error("statistic is degenerate: {0}")]
    DegenerateStatistic(String),

    #[error("precondition violated: {0}")]
    Precondition(String),

    #[error("domain error: {0}")]
    Domain(String),

    #[error("configuration error: {0}")]
    Config(String),

    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
