use std::path::PathBuf;

use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid register shape {n}x{rows}: both dimensions must be at least 1")]
    InvalidShape { n: usize, rows: usize },

    #[error("value {value} of attribute {attribute} is outside [0, {max}]", max = rows - 1)]
    ValueOutOfRange {
        attribute: usize,
        value: usize,
        rows: usize,
    },

    #[error("function has {got} attributes, register expects {expected}")]
    LengthMismatch { expected: usize, got: usize },

    #[error("attribute {column} has no registered value")]
    EmptyColumn { column: usize },

    #[error("class {class} out of range for {classes} registers")]
    ClassOutOfRange { class: usize, classes: usize },

    #[error("function is partial at attribute {attribute}")]
    PartialFunction { attribute: usize },

    #[error("{0}")]
    Domain(String),

    #[error("{path}:{line}: {message}")]
    Parse {
        path: PathBuf,
        line: u64,
        message: String,
    },

    #[error("{path}: {message}")]
    Metadata { path: PathBuf, message: String },

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    /// True for errors caused by input data rather than by the caller.
    pub fn is_data_error(&self) -> bool {
        matches!(
            self,
            Error::Parse { .. } | Error::Metadata { .. } | Error::Io { .. }
        )
    }
}
