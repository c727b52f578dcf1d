use thiserror::Error;

/// Errors produced by the analysis pipeline.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("dual step length must satisfy gamma > 1, got {gamma}")]
    InvalidGamma { gamma: f64 },

    #[error("gamma = {gamma} is outside the claimed region (requires gamma > {threshold})")]
    OutsideClaimedRegion { gamma: f64, threshold: f64 },

    #[error("domain error at gamma = {gamma}: {what} = {value:e}")]
    Domain {
        gamma: f64,
        what: &'static str,
        value: f64,
    },

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("dimension mismatch: expected {expected}, got {found}")]
    DimensionMismatch { expected: usize, found: usize },

    #[error("too many elements for exhaustive enumeration: {count} > {max}")]
    Size { count: usize, max: usize },

    #[error("input is not cyclically monotone (cycle {cycle:?} has sum {sum:e})")]
    Monotonicity { cycle: Vec<usize>, sum: f64 },

    #[error("matrix is not of rank {rank} within tolerance: eigenvalue {eigenvalue:e} vs lambda_max {lambda_max:e}")]
    Rank {
        rank: usize,
        eigenvalue: f64,
        lambda_max: f64,
    },

    #[error("active-set enumeration found no valid proximal candidate")]
    Enumeration,
}

pub type Result<T> = std::result::Result<T, Error>;
