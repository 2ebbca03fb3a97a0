use thiserror::Error;

/// Errors raised by the numerical core.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("grid needs at least {min} cells, got {n}")]
    Grid { n: usize, min: usize },

    #[error("Robin coefficients invalid: {0}")]
    RobinParameter(String),

    #[error("parameter `{name}` = {value} outside its domain ({expected})")]
    Domain {
        name: &'static str,
        value: f64,
        expected: &'static str,
    },

    #[error("shape mismatch: expected length {expected}, got {got}")]
    Shape { expected: usize, got: usize },

    #[error("non-finite entry at index {0}")]
    NonFinite(usize),

    #[error("linear solver failure: {0}")]
    Solver(String),

    #[error("dense eigensolve limited to n <= {max}, got {n}")]
    Capacity { n: usize, max: usize },

    #[error("impulse has nonzero entry at node {node} (x = {x}) outside the control region")]
    Support { node: usize, x: f64 },

    #[error("state has zero norm")]
    ZeroState,

    #[error("need at least {needed} samples, got {got}")]
    InsufficientData { needed: usize, got: usize },

    #[error("invalid argument: {0}")]
    Argument(String),

    #[error("no admissible l up to {max_l}")]
    Constants { max_l: u64 },

    #[error("constant fit failed: {0}")]
    Fit(String),

    #[error("config parse error at line {line}, column {column}: {message}")]
    Parse {
        line: usize,
        column: usize,
        message: String,
    },

    #[error("invalid config field `{field}`: {message}")]
    Validation { field: String, message: String },
}

pub type Result<T> = std::result::Result<T, Error>;
