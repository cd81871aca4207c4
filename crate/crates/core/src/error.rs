use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("degenerate classifier: {0}")]
    DegenerateClassifier(String),

    #[error("invalid mixture weights: {0}")]
    InvalidWeights(String),

    #[error("invalid attack budget: {0}")]
    InvalidBudget(String),

    #[error("invalid label {label}: {reason}")]
    InvalidLabel { label: i64, reason: &'static str },

    #[error("invalid configuration: {0}")]
    InvalidConfig(String),

    #[error("contract violation: {0}")]
    ContractViolation(String),

    #[error("non-finite {what} at iteration {iteration}")]
    NonFinite { what: &'static str, iteration: usize },

    #[error(
        "mixture has {m} classifiers but the lattice cap is {max_m}; \
         exhaustive enumeration costs 2^m membership calls"
    )]
    SizeCap { m: usize, max_m: usize },

    #[error("parse error: {0}")]
    Parse(String),

    #[error("{path}: {source}")]
    Io { path: String, source: std::io::Error },
}
