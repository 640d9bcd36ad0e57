use std::io;
use std::path::PathBuf;

use edgeal_core::tensor::FormatError;

pub type Result<T, E = Error> = std::result::Result<T, E>;

// Causes are folded into each message rather than exposed as `source()`,
// so a printed error chain does not repeat them.

#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("{}: {cause}", path.display())]
    Io { path: PathBuf, cause: io::Error },
    #[error("{}: {cause}", path.display())]
    Tensor { path: PathBuf, cause: FormatError },
    #[error("{}: {message}", path.display())]
    File { path: PathBuf, message: String },
    #[error("sample {name}: {message}")]
    Sample { name: String, message: String },
    #[error("empty split: {0}")]
    EmptySplit(&'static str),
    #[error("{0}")]
    Dataset(String),
    #[error("config: {0}")]
    Config(String),
    #[error("{strategy}, seed {seed}, round {round}: {cause}")]
    Cell {
        strategy: String,
        seed: u64,
        round: usize,
        cause: Box<Error>,
    },
    #[error(transparent)]
    Core(#[from] edgeal_core::Error),
    #[error(transparent)]
    Csv(#[from] csv::Error),
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: io::Error) -> Self {
        Error::Io {
            path: path.into(),
            cause: source,
        }
    }

    pub(crate) fn file(path: impl Into<PathBuf>, message: impl ToString) -> Self {
        Error::File {
            path: path.into(),
            message: message.to_string(),
        }
    }
}
