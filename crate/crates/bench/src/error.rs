use std::fmt;
use std::io;
use std::path::PathBuf;

use fmm_core::FmmError;

/// Failures of the harness, each tied to one process exit code.
#[derive(Debug)]
pub enum BenchError {
    /// Bad arguments or a configuration the library rejects.
    Usage(String),
    Io {
        path: Option<PathBuf>,
        source: io::Error,
    },
    /// Record serialization failed.
    Encode(String),
    Fmm(FmmError),
    /// `--assert-error-below` was violated.
    Assertion {
        error: f64,
        limit: f64,
    },
}

impl BenchError {
    pub fn exit_code(&self) -> i32 {
        match self {
            BenchError::Usage(_) | BenchError::Fmm(_) => 1,
            BenchError::Io { .. } | BenchError::Encode(_) => 2,
            BenchError::Assertion { .. } => 3,
        }
    }

    pub(crate) fn io(path: Option<PathBuf>, source: io::Error) -> Self {
        BenchError::Io { path, source }
    }
}

impl fmt::Display for BenchError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            BenchError::Usage(msg) => write!(f, "usage: {msg}"),
            BenchError::Io {
                path: Some(p),
                source,
            } => write!(f, "{}: {source}", p.display()),
            BenchError::Io { path: None, source } => write!(f, "i/o: {source}"),
            BenchError::Encode(msg) => write!(f, "cannot encode record: {msg}"),
            BenchError::Fmm(e) => write!(f, "fmm: {e}"),
            BenchError::Assertion { error, limit } => {
                write!(f, "error {error:e} is not below {limit:e}")
            }
        }
    }
}

impl std::error::Error for BenchError {
    fn source(&self) -> Option<&(dyn std::error::Error + 'static)> {
        match self {
            BenchError::Io { source, .. } => Some(source),
            BenchError::Fmm(e) => Some(e),
            _ => None,
        }
    }
}

impl From<FmmError> for BenchError {
    fn from(e: FmmError) -> Self {
        BenchError::Fmm(e)
    }
}

impl From<csv::Error> for BenchError {
    fn from(e: csv::Error) -> Self {
        if e.is_io_error() {
            match e.into_kind() {
                csv::ErrorKind::Io(source) => BenchError::io(None, source),
                _ => unreachable!(),
            }
        } else {
            BenchError::Encode(e.to_string())
        }
    }
}

impl From<serde_json::Error> for BenchError {
    fn from(e: serde_json::Error) -> Self {
        BenchError::Encode(e.to_string())
    }
}

pub type Result<T> = std::result::Result<T, BenchError>;
