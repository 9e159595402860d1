use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("measure has no atoms or zero total mass")]
    EmptySupport,
    #[error("negative weight {0}")]
    NegativeWeight(f64),
    #[error("non-finite value in {0}")]
    NonFinite(&'static str),
    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimMismatch { expected: usize, found: usize },
    #[error("argument out of range: {0}")]
    OutOfRange(String),
    #[error("invalid risk specification: {0}")]
    InvalidSpec(String),
    #[error("malformed problem: {0}")]
    Malformed(String),
    #[error("recourse problem infeasible at x={x:?}, z={z:?}")]
    RecourseInfeasible { x: Vec<f64>, z: Vec<f64> },
    #[error("recourse problem unbounded at x={x:?}, z={z:?}")]
    RecourseUnbounded { x: Vec<f64>, z: Vec<f64> },
    #[error("numerical failure: {0}")]
    NumericalFailure(String),
    #[error("{found} constraints exceed the limit of {limit}")]
    ConstraintLimitExceeded { found: usize, limit: usize },
    #[error("integer box with {volume} lattice points exceeds the limit of {limit}")]
    BoxTooLarge { volume: u128, limit: u128 },
    #[error("invalid growth exponent: {0}")]
    InvalidExponent(String),
    #[error("expression parameter map has no declared growth exponent")]
    MissingDeclaredExponent,
    #[error("operation unsupported for dimension {0}")]
    DimensionUnsupported(usize),
    #[error("empty set")]
    EmptySet,
    #[error("unknown report column `{0}`")]
    UnknownColumn(String),
    #[error("expression parse error: {0}")]
    Parse(String),
    #[error("I/O error: {0}")]
    Io(String),
}

impl Error {
    /// True for errors that signal a violated modelling assumption at a
    /// specific evaluation point rather than malformed input.
    pub fn is_recourse_failure(&self) -> bool {
        matches!(
            self,
            Error::RecourseInfeasible { .. } | Error::RecourseUnbounded { .. }
        )
    }
}

impl From<std::io::Error> for Error {
    fn from(e: std::io::Error) -> Self {
        Error::Io(e.to_string())
    }
}

impl From<serde_json::Error> for Error {
    fn from(e: serde_json::Error) -> Self {
        Error::Parse(e.to_string())
    }
}
