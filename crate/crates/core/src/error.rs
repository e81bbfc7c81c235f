use alloc::string::String;

pub type Result<T, E = Error> = core::result::Result<T, E>;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum Error {
    #[error("invalid dimensions: {0}")]
    InvalidDimensions(String),
    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },
    #[error("regularization must be positive, got {0}")]
    NonPositiveRegularization(f64),
    #[error("non-finite value in {0}")]
    NonFinite(&'static str),
    #[error("matrix is not positive definite")]
    NotPositiveDefinite,
    #[error("gram matrix is not positive semidefinite (eigenvalue below -1e-10)")]
    NotPositiveSemidefinite,
    #[error("dataset is empty")]
    EmptyDataset,
    #[error("dataset carries no per-step rewards")]
    MissingStepRewards,
    #[error("primal covariance dimension {dim} exceeds threshold {threshold}")]
    DimensionThreshold { dim: usize, threshold: usize },
    #[error("gradient descent diverged after {iterations} iterations")]
    Diverged { iterations: usize },
    #[error("invalid policy: {0}")]
    InvalidPolicy(String),
    #[error("invalid parameter `{name}`: {reason}")]
    InvalidParameter { name: &'static str, reason: String },
}
