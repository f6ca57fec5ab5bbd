use thiserror::Error;

/// Errors produced by every fallible operation in the crate.
#[derive(Debug, Error)]
pub enum MsgpError {
    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("operator is not symmetric: {0}")]
    NotSymmetric(String),

    #[error("imaginary residual {residual:e} exceeds tolerance {tolerance:e}")]
    ImaginaryResidual { residual: f64, tolerance: f64 },

    #[error("non-positive eigenvalue {value:e} at index {index}")]
    NonPositiveEigenvalue { index: usize, value: f64 },

    #[error(
        "point {point} lies outside the grid in dimension {dim}: coordinate {coord} not in [{lower}, {upper}]"
    )]
    OutOfGrid {
        point: usize,
        dim: usize,
        coord: f64,
        lower: f64,
        upper: f64,
    },

    #[error("conjugate gradients did not converge after {iterations} iterations (relative residual {residual:e})")]
    NotConverged { iterations: usize, residual: f64 },

    #[error("non-finite value: {0}")]
    NonFinite(String),

    #[error("matrix is not positive definite: {0}")]
    NotPositiveDefinite(String),

    #[error("kernel is not separable across dimensions; use the BTTB path for radial Matern/RQ kernels")]
    NonSeparable,

    #[error("rank deficient: {0}")]
    RankDeficient(String),

    #[error("optimizer diverged: {0}")]
    Diverged(String),

    #[error("configuration error: {0}")]
    Config(String),

    #[error("serialization error: {0}")]
    Serialization(#[from] serde_json::Error),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, MsgpError>;

pub(crate) fn check_len(expected: usize, got: usize) -> Result<()> {
    if expected == got {
        Ok(())
    } else {
        Err(MsgpError::DimensionMismatch { expected, got })
    }
}
