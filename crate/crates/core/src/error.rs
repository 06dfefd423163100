use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SbssError {
    #[error("invalid kernel: {0}")]
    InvalidKernel(String),

    #[error("invalid location set: {0}")]
    InvalidLocations(String),

    #[error("invalid sample: {0}")]
    InvalidSample(String),

    #[error("kernel {0} has empty support on these locations (all weights are zero)")]
    EmptyKernelSupport(String),

    #[error("local difference matrix is identically zero for the zero-lag kernel")]
    ZeroLagDifference,

    #[error("matrix is not positive definite (smallest eigenvalue {smallest:e}, largest {largest:e})")]
    NotPositiveDefinite { smallest: f64, largest: f64 },

    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),

    #[error("matrix is singular: {0}")]
    Singular(String),

    #[error("MDI undefined: row {0} of the gain matrix is (numerically) zero")]
    ZeroRow(usize),

    #[error("Cholesky factorization failed even with jitter {0:e}")]
    CholeskyFailed(f64),

    #[error("non-positive value {value} at row {row}, part '{part}'")]
    NonPositivePart { row: usize, part: String, value: f64 },

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),
}

pub type Result<T> = std::result::Result<T, SbssError>;
