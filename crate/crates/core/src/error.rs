use std::path::PathBuf;

use thiserror::Error;

/// Errors surfaced by the library. Each variant maps onto one CLI exit class.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),

    #[error("{file}:{line}: {msg}")]
    Parse {
        file: String,
        line: usize,
        msg: String,
    },

    #[error("missing file {0}")]
    MissingFile(PathBuf),

    #[error("invalid data: {0}")]
    InvalidData(String),

    #[error("non-finite value in {0}")]
    NonFinite(String),

    #[error("tolerance exceeded: {0}")]
    Tolerance(String),

    #[error("{context}: {source}")]
    Context {
        context: String,
        #[source]
        source: Box<Error>,
    },

    #[error("io error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("json error: {0}")]
    Json(#[from] serde_json::Error),
}

/// Failure classes used for process exit codes.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ErrorClass {
    Usage,
    Data,
    Numeric,
}

impl ErrorClass {
    pub fn exit_code(self) -> i32 {
        match self {
            ErrorClass::Usage => 1,
            ErrorClass::Data => 2,
            ErrorClass::Numeric => 3,
        }
    }
}

impl Error {
    pub fn class(&self) -> ErrorClass {
        match self {
            Error::InvalidArgument(_) => ErrorClass::Usage,
            Error::NonFinite(_) | Error::Tolerance(_) => ErrorClass::Numeric,
            Error::Context { source, .. } => source.class(),
            Error::DimensionMismatch(_)
            | Error::Parse { .. }
            | Error::MissingFile(_)
            | Error::InvalidData(_)
            | Error::Io { .. }
            | Error::Json(_) => ErrorClass::Data,
        }
    }

    pub fn context(self, context: impl Into<String>) -> Error {
        Error::Context {
            context: context.into(),
            source: Box::new(self),
        }
    }

    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Error {
        Error::Io {
            path: path.into(),
            source,
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
