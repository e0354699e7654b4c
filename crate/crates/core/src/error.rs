use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },
    #[error("invalid parameter: {0}")]
    Parameter(String),
    #[error("invalid instance: {0}")]
    InvalidInstance(String),
    #[error("degenerate instance: {0}")]
    Degenerate(String),
    #[error("solution has no centers")]
    EmptySolution,
    #[error("enumeration size {size} exceeds cap {cap}")]
    CapExceeded { size: u128, cap: u128 },
    #[error("unknown cell {0}")]
    UnknownCell(usize),
    #[error("line {line}: {message}")]
    Parse { line: usize, message: String },
    #[error("infeasible: {0}")]
    Infeasible(String),
    #[error("internal assertion failed: {0}")]
    Internal(String),
}

impl Error {
    pub(crate) fn param(msg: impl Into<String>) -> Self {
        Error::Parameter(msg.into())
    }
}
