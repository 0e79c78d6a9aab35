use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("weights must be finite and strictly positive (index {index}, value {value})")]
    NonPositiveWeight { index: usize, value: f64 },

    #[error("empty weight vector")]
    EmptyWeights,

    #[error("support of size {k} in dimension {d} has no cone representation (need 1 <= k <= d - 1)")]
    DegenerateSupport { k: usize, d: usize },

    #[error("support index {index} out of range for dimension {d}")]
    IndexOutOfRange { index: usize, d: usize },

    #[error("support indices must be strictly increasing")]
    UnsortedSupport,

    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("marginal probability {value} at index {index} is outside (0, 1)")]
    InvalidBeta { index: usize, value: f64 },

    #[error("invalid parameter `{name}`: {reason}")]
    InvalidParameter { name: &'static str, reason: String },

    #[error("invalid distribution: {0}")]
    InvalidDistribution(String),

    #[error("mask file line {line}: {reason}")]
    MaskParse { line: usize, reason: String },

    #[error("io error: {0}")]
    Io(String),

    #[error("linear program is infeasible")]
    Infeasible,

    #[error("linear program is unbounded")]
    Unbounded,

    #[error(
        "interior point solver hit the iteration limit ({iterations}); residuals: primal {primal:.3e}, dual {dual:.3e}, gap {gap:.3e}"
    )]
    MaxIterations {
        iterations: usize,
        primal: f64,
        dual: f64,
        gap: f64,
    },

    #[error("normal equations could not be factored")]
    Factorization,
}

impl From<std::io::Error> for Error {
    fn from(e: std::io::Error) -> Self {
        Error::Io(e.to_string())
    }
}

pub(crate) fn invalid(name: &'static str, reason: impl Into<String>) -> Error {
    Error::InvalidParameter {
        name,
        reason: reason.into(),
    }
}
