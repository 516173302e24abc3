use thiserror::Error;

/// Errors raised by the estimation and testing routines.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("domain error: {0}")]
    Domain(String),

    #[error("invalid dataset: {0}")]
    InvalidData(String),

    #[error("design matrix is rank deficient (rank {rank} < {cols} columns)")]
    RankDeficient { rank: usize, cols: usize },

    #[error("dimension mismatch: {0}")]
    Dimension(String),

    #[error("degenerate fit: {0}")]
    DegenerateFit(String),

    #[error("shape parameter reached the boundary (alpha = {0:e})")]
    Boundary(f64),

    #[error("fit did not converge: {0}")]
    NotConverged(String),

    #[error("unsupported configuration: {0}")]
    Unsupported(String),

    #[error("simulation aborted: {excluded} of {replications} replications failed to converge")]
    TooManyFailures { excluded: usize, replications: usize },
}

pub type Result<T> = std::result::Result<T, Error>;
