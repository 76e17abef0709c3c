use std::path::PathBuf;

use thiserror::Error;

use crate::cypher::QueryError;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("I/O error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("malformed file {path} at line {line}: {message}")]
    Malformed {
        path: PathBuf,
        line: usize,
        message: String,
    },

    #[error("record {id}: missing required field `{field}`")]
    MissingField { id: String, field: String },

    #[error("record {id}: invalid field `{field}`: {message}")]
    InvalidField {
        id: String,
        field: String,
        message: String,
    },

    #[error("duplicate record id {0}")]
    DuplicateId(String),

    #[error("precondition failed: {0}")]
    Precondition(String),

    #[error("prompt context is missing `{0}`")]
    MissingContext(&'static str),

    #[error("provider error: {0}")]
    Provider(String),

    #[error("provider timed out after {0:?}")]
    Timeout(std::time::Duration),

    #[error("could not parse provider reply: {message}")]
    Reply { message: String, raw: String },

    #[error("substitution rules contain a cycle: {}", .0.join(" -> "))]
    Cycle(Vec<String>),

    #[error("graph error: {0}")]
    Graph(String),

    #[error("snapshot version mismatch: file has {found}, expected {expected}")]
    VersionMismatch { found: u32, expected: u32 },

    #[error("embedding dimension mismatch: {left} vs {right}")]
    DimensionMismatch { left: usize, right: usize },

    #[error("text has no tokens to embed")]
    EmptyEmbedding,

    #[error(transparent)]
    Query(#[from] QueryError),

    #[error("configuration error: {0}")]
    Config(String),

    /// Answer generation failed after retrieval succeeded; `partial` holds an
    /// extractive answer built from the retrieved sentences and sources.
    #[error("answer generation failed: {source}")]
    Generation {
        #[source]
        source: Box<Error>,
        partial: Box<crate::rag::Answer>,
    },

    #[error("record {id}: {source}")]
    Record {
        id: String,
        #[source]
        source: Box<Error>,
    },
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    /// Wraps an error with the id of the corpus record it concerns.
    pub fn for_record(self, id: impl Into<String>) -> Self {
        Error::Record {
            id: id.into(),
            source: Box::new(self),
        }
    }
}
