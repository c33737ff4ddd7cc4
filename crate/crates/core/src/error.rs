use std::path::PathBuf;

use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    /// Tensor shapes do not line up. `context` names the offending layer or op.
    #[error("dimension mismatch in {context}: {detail}")]
    Dimension { context: String, detail: String },

    #[error("index {index} out of range (limit {limit}) in {context}")]
    Index {
        context: String,
        index: usize,
        limit: usize,
    },

    /// A caller broke a documented precondition.
    #[error("contract violation: {0}")]
    Contract(String),

    #[error("{path}:{line}: {msg}")]
    Parse {
        path: String,
        line: usize,
        msg: String,
    },

    #[error("data integrity: {0}")]
    Integrity(String),

    #[error("no protein atom within {contact_dist} Å of the ligand; pocket is empty")]
    EmptyPocket { contact_dist: f64 },

    #[error("correlation undefined: {0}")]
    UndefinedCorrelation(String),

    #[error("numeric abort: {0}")]
    NumericAbort(String),

    #[error("checkpoint: {0}")]
    Checkpoint(String),

    #[error("weight transfer: {0}")]
    Transfer(String),

    #[error("config: {0}")]
    Config(String),

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

impl Error {
    pub(crate) fn dim(context: impl Into<String>, detail: impl Into<String>) -> Self {
        Error::Dimension {
            context: context.into(),
            detail: detail.into(),
        }
    }

    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }
}
