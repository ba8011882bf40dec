use std::path::PathBuf;

use crate::oracle::Violation;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("shape mismatch: expected {expected}, got {actual}")]
    ShapeMismatch { expected: String, actual: String },

    #[error("infeasible instance: {0}")]
    InfeasibleInstance(String),

    #[error("tour violates {} constraint(s): {}", .0.len(), format_violations(.0))]
    Infeasible(Vec<Violation>),

    #[error("line {line}: {message}")]
    Parse { line: usize, message: String },

    #[error("convexity certification failed: {0}")]
    Certification(String),

    #[error("beta sequence diverged at step {step} (beta = {value})")]
    Divergence { step: usize, value: f64 },

    #[error("instance too large for exhaustive enumeration: {0}")]
    TooLarge(String),

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

fn format_violations(v: &[Violation]) -> String {
    v.iter()
        .map(|x| x.to_string())
        .collect::<Vec<_>>()
        .join("; ")
}

impl Error {
    pub(crate) fn invalid(msg: impl Into<String>) -> Self {
        Error::InvalidArgument(msg.into())
    }

    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }
}
