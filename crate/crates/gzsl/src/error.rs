use std::path::PathBuf;

use thiserror::Error;

/// Errors of the file formats, the generator and the command line.
#[derive(Debug, Error)]
pub enum GzslError {
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("{path}:{line}: {message}")]
    MalformedFile { path: PathBuf, line: usize, message: String },
    #[error("training split contains sample {sample} of unseen class {class}")]
    UnseenInTrain { sample: String, class: usize },
    #[error("invalid synthetic spec: {0}")]
    InvalidSpec(String),
    #[error("no trained model at {0}")]
    ModelNotLoaded(PathBuf),
    #[error("{0}")]
    Usage(String),
    #[error(transparent)]
    Core(#[from] gzsl_core::Error),
}

pub type Result<T> = std::result::Result<T, GzslError>;

impl GzslError {
    /// Process exit code: 1 usage, 2 data, 3 numeric failure.
    pub fn exit_code(&self) -> i32 {
        match self {
            GzslError::Usage(_) => 1,
            GzslError::Core(e) if e.is_numeric() => 3,
            _ => 2,
        }
    }

    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        GzslError::Io { path: path.into(), source }
    }

    pub(crate) fn malformed(path: impl Into<PathBuf>, line: usize, message: impl Into<String>) -> Self {
        GzslError::MalformedFile { path: path.into(), line, message: message.into() }
    }
}
