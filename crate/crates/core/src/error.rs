use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("i/o error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("cannot decode {path}: {message}")]
    Format { path: PathBuf, message: String },

    #[error("cannot encode {path}: {message}")]
    Encode { path: PathBuf, message: String },

    /// A precondition on the arguments of an operation does not hold.
    #[error("contract violation: {0}")]
    Contract(String),

    /// Seed selection produced no seeds at all.
    #[error("empty seed set: {0}")]
    EmptySeeds(&'static str),

    #[error("singular system in ranking solve at pivot {pivot}; isolated nodes: {isolated:?}")]
    SingularSystem { pivot: usize, isolated: Vec<usize> },

    /// ROC-AUC is undefined when the ground truth holds a single class.
    #[error("AUC undefined: ground truth contains a single class")]
    UndefinedAuc,
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    pub(crate) fn contract(msg: impl Into<String>) -> Self {
        Error::Contract(msg.into())
    }
}
