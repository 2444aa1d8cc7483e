use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("kernel index {index} out of range for a domain of {size} points")]
    IndexOutOfRange { index: usize, size: usize },

    #[error("location kind does not match kernel variant: {0}")]
    LocationMismatch(&'static str),

    #[error("matrix is not positive definite after jitter up to {max_jitter:e}")]
    NotPositiveDefinite { max_jitter: f64 },

    #[error("hyperparameter not identifiable: {0}")]
    Identifiability(String),

    #[error("configuration error: {0}")]
    Config(String),

    #[error("empty input: {0}")]
    Empty(&'static str),

    #[error("ragged row {row}: expected {expected} fields, found {found}")]
    RaggedRow {
        row: usize,
        expected: usize,
        found: usize,
    },

    #[error("unparseable number {value:?} at row {row}, column {column}")]
    ParseNumber {
        row: usize,
        column: usize,
        value: String,
    },

    #[error("malformed CSV: {0}")]
    Csv(String),

    #[error("too many aborted trials: {aborted} of {total}")]
    TooManyAborted { aborted: usize, total: usize },

    #[error("I/O error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
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

    /// True for failures of the numerical kind (factorization breakdown,
    /// aborted trials) as opposed to bad input.
    pub fn is_numerical(&self) -> bool {
        matches!(
            self,
            Error::NotPositiveDefinite { .. } | Error::TooManyAborted { .. }
        )
    }
}
