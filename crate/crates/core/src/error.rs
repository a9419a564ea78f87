use thiserror::Error;

/// Failure modes shared by every lab module.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum LabError {
    #[error("invalid argument: {0}")]
    InvalidArgument(String),
    #[error("dimension mismatch: expected {expected}, got {actual}")]
    DimensionMismatch { expected: usize, actual: usize },
    #[error("function value is not finite on mode {mode} (frequency {frequency})")]
    NonFiniteOnMode { mode: usize, frequency: f64 },
    #[error("hypothesis violated: {0}")]
    HypothesisViolation(String),
    #[error("{requested} exceeds the truncation ceiling {ceiling}")]
    OutsideTruncation { requested: f64, ceiling: f64 },
    #[error("quadrature did not converge: resolutions differ by {discrepancy:e}")]
    QuadratureDivergence { discrepancy: f64 },
    #[error("eigenvalue {modulus} lies too close to the contour of radius {radius}")]
    ContourViolation { modulus: f64, radius: f64 },
    #[error("too few samples: need {required}, got {actual}")]
    InsufficientData { required: usize, actual: usize },
    #[error("numerical failure: {0}")]
    Numeric(String),
}

pub type Result<T> = std::result::Result<T, LabError>;

impl From<ndarray_linalg::error::LinalgError> for LabError {
    fn from(err: ndarray_linalg::error::LinalgError) -> Self {
        LabError::Numeric(err.to_string())
    }
}

pub(crate) fn ensure(condition: bool, message: impl FnOnce() -> String) -> Result<()> {
    if condition {
        Ok(())
    } else {
        Err(LabError::InvalidArgument(message()))
    }
}
