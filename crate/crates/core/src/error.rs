use thiserror::Error;

use crate::llm::LlmError;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("line {line}: {message}")]
    Parse { line: usize, message: String },

    #[error("knowledge graph is empty")]
    EmptyGraph,

    #[error("unknown entity `{0}`")]
    UnknownEntity(String),

    #[error("none of the seed entities are present in the graph")]
    EmptySeeds,

    #[error("cannot label query: {0}")]
    Labeling(String),

    #[error("degenerate training set: {0}")]
    DegenerateTraining(String),

    #[error("query text is empty")]
    EmptyText,

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("invalid model file: {0}")]
    ModelFormat(String),

    #[error("dataset line {line}: {message}")]
    Dataset { line: usize, message: String },

    #[error(transparent)]
    Llm(#[from] LlmError),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}
