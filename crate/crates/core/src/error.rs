use std::io;
use std::path::PathBuf;

use thiserror::Error;

use crate::wordnet::SynsetId;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("{}: {source}", path.display())]
    Io { path: PathBuf, source: io::Error },

    #[error("{file}:{line}: malformed {field}: {message}")]
    Malformed {
        file: String,
        line: usize,
        field: &'static str,
        message: String,
    },

    #[error("malformed database: {file} contains no synsets")]
    EmptyDatabase { file: String },

    #[error("{file}:{line}: dangling synset offset {offset}")]
    DanglingOffset {
        file: String,
        line: usize,
        offset: SynsetId,
    },

    #[error("hypernym cycle detected through synset {0}")]
    Cycle(SynsetId),

    #[error("unknown synset {0}")]
    UnknownSynset(SynsetId),

    #[error("provenance mismatch on {what}: expected {expected}, found {found}")]
    Provenance {
        what: &'static str,
        expected: String,
        found: String,
    },

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("non-finite value in {0}")]
    NonFinite(&'static str),

    #[error("dimension mismatch: {0}")]
    Dimension(String),

    #[error("training diverged at epoch {epoch}: mean loss {loss}")]
    Diverged { epoch: usize, loss: f64 },

    #[error("unresolved downstream labels: {}", .0.join(", "))]
    Unresolved(Vec<String>),
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    pub(crate) fn malformed(
        file: impl Into<String>,
        line: usize,
        field: &'static str,
        message: impl Into<String>,
    ) -> Self {
        Error::Malformed {
            file: file.into(),
            line,
            field,
            message: message.into(),
        }
    }
}
