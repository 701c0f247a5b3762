use thiserror::Error;

/// Errors raised by the library.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("empty input")]
    Empty,

    #[error("invalid probability data: {0}")]
    InvalidProbability(String),

    #[error("invalid cost function: {0}")]
    InvalidCost(String),

    #[error("state index {index} out of range for {n} states")]
    IndexOutOfRange { index: usize, n: usize },

    #[error("invalid parameter `{name}`: {reason}")]
    InvalidParameter { name: &'static str, reason: String },

    #[error("kernel is not unichain: {0}")]
    NotUnichain(String),

    #[error("passive dynamics not ergodic (irreducible: {irreducible}, aperiodic: {aperiodic})")]
    NotErgodic { irreducible: bool, aperiodic: bool },

    #[error("assumption violated: {0}")]
    Assumption(String),

    #[error("no convergence after {iterations} iterations; eigenvalue bracket [{lower:e}, {upper:e}]")]
    NoConvergence {
        iterations: usize,
        lower: f64,
        upper: f64,
    },

    #[error("cost cap violated: max cost {max} exceeds cap {cap}")]
    CostCapViolation { max: f64, cap: f64 },

    #[error("invalid graph: {0}")]
    InvalidGraph(String),

    #[error("parse error at line {line}: {message}")]
    Parse { line: usize, message: String },

    #[error("degenerate input: {0}")]
    Degenerate(String),
}

pub type Result<T> = std::result::Result<T, Error>;
