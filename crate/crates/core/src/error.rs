use std::io;

use crate::model::NuggetId;

#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("invalid input: {0}")]
    InvalidInput(String),
    #[error("key unavailable: predicate {0:?} is not in the schema")]
    KeyUnavailable(String),
    #[error("degenerate interval: {0}")]
    DegenerateInterval(String),
    #[error("schema missing: {0}; governed integration refused")]
    SchemaMissing(String),
    #[error("nugget not found: {0}")]
    NotFound(NuggetId),
    #[error("no open review item for {0}")]
    NoOpenReview(NuggetId),
    #[error("dense mode is disabled")]
    UnsupportedMode,
    #[error("extractor transport failure on {doc_id}#{sentence_index}: {detail}")]
    Transport {
        doc_id: String,
        sentence_index: usize,
        detail: String,
    },
    #[error("storage error: {0}")]
    Storage(String),
    #[error("io error: {0}")]
    Io(#[from] io::Error),
    #[error("json error: {0}")]
    Json(#[from] serde_json::Error),
    #[error("config error: {0}")]
    Config(String),
}

impl From<bincode::Error> for Error {
    fn from(e: bincode::Error) -> Self {
        Error::Storage(e.to_string())
    }
}

pub type Result<T> = std::result::Result<T, Error>;
