use std::path::PathBuf;

use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("i/o error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("{path}:{line}: {message}")]
    Parse {
        path: PathBuf,
        line: usize,
        message: String,
    },

    #[error("corpus `{0}` is empty")]
    EmptyCorpus(String),

    #[error("unknown object id `{0}`")]
    UnknownObject(String),

    #[error("unknown query id `{0}`")]
    UnknownQuery(String),

    #[error("unknown corpus `{0}`")]
    UnknownCorpus(String),

    #[error("verb `{0}` has no entry in the verb frame table")]
    MissingVerbFrame(String),

    #[error("adjective `{0}` has no entry in the comparative lexicon")]
    MissingAdjective(String),

    #[error("object `{0}` is not in the co-occurrence model")]
    NotInModel(String),

    #[error("object `{0}` is not eligible for correlation")]
    NotCorrelatable(String),

    #[error("threshold {0} outside [0, 1]")]
    Threshold(f64),

    #[error("query `{0}` is not an answered analogy")]
    NotAnswered(String),

    #[error("no pair score for corpuses `{0}` and `{1}`")]
    MissingPairScore(String, String),

    #[error("no review sample has been prepared")]
    NoSample,

    #[error("no labels with an answer judgment")]
    NoJudgments,

    #[error("timestamp {ts} for query `{query_id}` is not after {last}")]
    NonMonotonicTimestamp { query_id: String, ts: u64, last: u64 },

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("json error: {0}")]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    pub(crate) fn parse(path: impl Into<PathBuf>, line: usize, message: impl Into<String>) -> Self {
        Error::Parse {
            path: path.into(),
            line,
            message: message.into(),
        }
    }
}
