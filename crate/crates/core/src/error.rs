use std::path::PathBuf;

/// Errors raised by the linking pipeline.
#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("i/o error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    /// A line of an input file failed to parse. Line numbers are 1-based.
    #[error("{path}:{line}: {message}")]
    Schema {
        path: PathBuf,
        line: usize,
        message: String,
    },

    #[error("configuration error: {0}")]
    Config(String),

    #[error("missing artifact: {0}")]
    MissingArtifact(PathBuf),

    #[error("dimension mismatch: {0}")]
    Dim(String),

    #[error("training diverged at update {update}: loss is not finite")]
    Diverged { update: u64 },

    #[error("{0}")]
    Invalid(String),
}

impl Error {
    pub fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io { path: path.into(), source }
    }

    pub fn schema(path: impl Into<PathBuf>, line: usize, message: impl Into<String>) -> Self {
        Error::Schema { path: path.into(), line, message: message.into() }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
