use thiserror::Error;

/// Errors produced by the DRF engine.
#[derive(Debug, Error)]
pub enum Error {
    #[error("dimension mismatch: {lhs:?} vs {rhs:?}")]
    Dimension { lhs: Vec<usize>, rhs: Vec<usize> },

    #[error("index {index} out of range for length {len}")]
    Index { index: usize, len: usize },

    #[error("feature queue is empty")]
    EmptyQueue,

    #[error("constraint violated: {0}")]
    Constraint(String),

    #[error("function is not deterministic: {first} != {second} at identical parameters")]
    NonDeterministic { first: f64, second: f64 },

    #[error("invalid configuration: {key}: {reason}")]
    Config { key: String, reason: String },

    #[error("parse error at line {line}: {reason}")]
    Parse { line: usize, reason: String },

    #[error("training diverged at epoch {epoch}, step {step}: non-finite loss")]
    Diverged {
        epoch: usize,
        step: usize,
        last_finite: Option<String>,
    },

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn dim_err(lhs: &[usize], rhs: &[usize]) -> Error {
    Error::Dimension {
        lhs: lhs.to_vec(),
        rhs: rhs.to_vec(),
    }
}
