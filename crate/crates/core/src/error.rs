use std::path::PathBuf;

use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    /// Shapes or hypergraph structure that do not fit together.
    #[error("structural error: {0}")]
    Structural(String),

    /// A configuration value outside its admissible range.
    #[error("invalid parameter: {0}")]
    Parameter(String),

    /// Input data that parsed but is inconsistent (dangling references, duplicates, ...).
    #[error("data error: {0}")]
    Data(String),

    #[error("failed to parse {path}: {message}")]
    Parse { path: PathBuf, message: String },

    /// Loss or gradient became NaN/Inf.
    #[error("numeric failure at epoch {epoch}: {message}")]
    Numeric { epoch: usize, message: String },

    #[error("i/o error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

impl Error {
    /// Process exit status: 1 for bad parameters, 3 for numeric failure,
    /// 2 for everything about the input data or files.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::Parameter(_) => 1,
            Error::Numeric { .. } => 3,
            _ => 2,
        }
    }

    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
