use std::path::PathBuf;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("duplicate document id `{0}`")]
    DuplicateDocId(String),
    #[error("cannot build an index over an empty collection")]
    EmptyCollection,
    #[error("unknown document id `{0}`")]
    UnknownDocId(String),
    #[error("invalid BM25 parameters: {0}")]
    InvalidParams(String),
    #[error("invalid configuration: {0}")]
    InvalidConfig(String),
    #[error("line {line}: {message}")]
    Parse { line: usize, message: String },
    #[error("duplicate turn id `{0}`")]
    DuplicateTurnId(String),
    #[error("pseudo-relevance feedback needs at least one document")]
    EmptyFeedback,
    #[error("empty training set")]
    EmptyTrainingSet,
    #[error("empty candidate list for `{0}`")]
    EmptyCandidates(String),
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub(crate) fn parse(line: usize, message: impl Into<String>) -> Self {
        Error::Parse {
            line,
            message: message.into(),
        }
    }

    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }
}
