use alloc::string::String;

/// Errors raised by the core routines.
#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum Error {
    #[error("no records")]
    NoRecords,
    #[error("record {row}: {reason}")]
    InvalidRecord { row: usize, reason: String },
    #[error("record {row}, covariate {column}: value {value} outside [{lower}, {upper}]")]
    CovariateOutOfBounds {
        row: usize,
        column: usize,
        value: f64,
        lower: f64,
        upper: f64,
    },
    #[error("invalid study end {0}")]
    InvalidStudyEnd(f64),
    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },
    #[error("invalid parameter `{name}`: {reason}")]
    InvalidParameter { name: &'static str, reason: String },
    #[error("cumulative baseline hazard is not invertible: {0}")]
    NonInvertibleHazard(String),
    #[error("x = {x} outside the dictionary domain [{lower}, {upper}]")]
    OutOfDomain { x: f64, lower: f64, upper: f64 },
    #[error("the {0} family has no second derivative")]
    NotDifferentiable(&'static str),
    #[error("matrix is not positive definite (pivot {pivot})")]
    Factorization { pivot: usize },
    #[error("singular factor for group {group}")]
    SingularFactor { group: usize },
    #[error("nobody at risk at time {0}")]
    EmptyRiskSet(f64),
    #[error("dataset has no events")]
    NoEvents,
    #[error("exponent {0} is below 1")]
    InvalidExponent(f64),
    #[error("group {0} is empty")]
    EmptyGroup(usize),
    #[error("{0}")]
    Unsupported(String),
    #[error("non-finite objective at iteration {iteration} (step {step})")]
    NonFinite { iteration: usize, step: f64 },
    #[error("missing constant `{0}`")]
    MissingConstant(&'static str),
    #[error("subject {0} is never at risk")]
    NeverAtRisk(usize),
}

pub type Result<T> = core::result::Result<T, Error>;

pub(crate) fn invalid(name: &'static str, reason: impl Into<String>) -> Error {
    Error::InvalidParameter {
        name,
        reason: reason.into(),
    }
}

pub(crate) fn check_len(expected: usize, got: usize) -> Result<()> {
    if expected == got {
        Ok(())
    } else {
        Err(Error::DimensionMismatch { expected, got })
    }
}
