use thiserror::Error;

/// Errors produced by the simulator and learning core.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("dimension mismatch: {what} (expected {expected}, got {got})")]
    DimensionMismatch {
        what: &'static str,
        expected: usize,
        got: usize,
    },

    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("system is singular or ill-conditioned (condition estimate {condition:e})")]
    Singular { condition: f64 },

    #[error("insufficient results for decoding: have {have} rows, need {need}")]
    InsufficientResults { have: usize, need: usize },

    #[error("degenerate task: every worker was allocated zero rows")]
    DegenerateTask,

    #[error("replay buffer is empty")]
    EmptyBuffer,

    #[error("root solver failed: {0}")]
    Solver(String),

    #[error("checkpoint error: {0}")]
    Checkpoint(String),
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn invalid(msg: impl Into<String>) -> Error {
    Error::InvalidInput(msg.into())
}
