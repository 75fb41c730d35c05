use std::path::PathBuf;

use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    /// The (unregularized) normal matrix is singular or numerically so.
    #[error("rank-deficient design: reciprocal condition number {rcond:e} of the {dim}x{dim} normal matrix")]
    RankDeficient { dim: usize, rcond: f64 },

    #[error("dimension mismatch: expected {expected} explanatory variables, got {found}")]
    DimensionMismatch { expected: usize, found: usize },

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    /// Residual energy of an IID-Gauss summary is negative beyond rounding.
    #[error("inconsistent summary: residual energy {0:e} is negative")]
    InconsistentSummary(f64),

    /// The fit leaves no spread to standardise by (zero residual scale).
    #[error("degenerate fit: zero residual scale")]
    DegenerateFit,

    #[error("not enough observations: need {needed}, have {have}")]
    InsufficientData { needed: usize, have: usize },

    #[error("{path}:{line}: {message}")]
    Parse {
        path: PathBuf,
        line: usize,
        message: String,
    },

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }
}
