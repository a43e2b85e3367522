use std::path::PathBuf;

use crate::solver::IterationRecord;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("format error in {}: {message}", path.display())]
    Format { path: PathBuf, message: String },

    #[error("validation error: {0}")]
    Validation(String),

    #[error("invalid parameter: {0}")]
    Parameter(String),

    #[error("unknown sample id `{0}`")]
    UnknownSample(String),

    #[error("cosine distance is undefined for a zero vector")]
    ZeroVector,

    #[error("dimension mismatch: {0}")]
    Dimension(String),

    #[error("matrix is not symmetric (max asymmetry {0:e})")]
    NotSymmetric(f64),

    #[error("numerical failure after {} iterations: {message}", trace.len())]
    Numerical {
        message: String,
        trace: Vec<IterationRecord>,
    },

    /// Every coefficient vanished after thresholding.
    #[error("solution has empty support")]
    EmptySupport,

    #[error("evaluation error: {0}")]
    Evaluation(String),

    #[error("invalid synthetic configuration: {0}")]
    Config(String),

    #[error("internal error: {0}")]
    Internal(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl Error {
    pub(crate) fn format(path: impl Into<PathBuf>, message: impl Into<String>) -> Self {
        Error::Format {
            path: path.into(),
            message: message.into(),
        }
    }
}
