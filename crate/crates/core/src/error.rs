use std::path::PathBuf;

use thiserror::Error;

use crate::solvers::IterateTrace;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("dimension mismatch in {op}: expected {expected}, got {got}")]
    DimensionMismatch {
        op: &'static str,
        expected: String,
        got: String,
    },

    #[error("precondition violated: {0}")]
    Precondition(String),

    #[error("invalid solver configuration: {0}")]
    InvalidConfig(String),

    /// A convergence-theorem parameter condition does not hold for this configuration.
    #[error("theorem-mode condition violated: {0}")]
    TheoremCondition(String),

    #[error("solver diverged at iteration {iteration}: {reason}")]
    Diverged {
        iteration: usize,
        reason: String,
        trace: Box<IterateTrace>,
    },

    #[error("degenerate update at iteration {iteration}: {reason}")]
    DegenerateUpdate { iteration: usize, reason: String },

    #[error("refused: {0}")]
    Refused(String),

    #[error("undefined metric: {0}")]
    UndefinedMetric(String),

    #[error("parse error at line {line}: {message}")]
    Parse { line: usize, message: String },

    #[error("malformed matrix file {path}: {message}")]
    MalformedFile { path: PathBuf, message: String },

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub(crate) fn dims(op: &'static str, expected: impl Into<String>, got: impl Into<String>) -> Self {
        Error::DimensionMismatch {
            op,
            expected: expected.into(),
            got: got.into(),
        }
    }
}
