//! Adaptive retrieval over knowledge graphs: a query-complexity classifier
//! routes each question to a shallow BFS pipeline or a deep shortest-path
//! pipeline, and the ranked reasoning paths are handed to an LLM.

pub mod classifier;
pub mod dataset;
pub mod error;
pub mod kg;
pub mod llm;
pub mod par;
pub mod pipeline;
pub mod preprocess;
pub mod ranking;
pub mod retrieval;
pub mod synth;
pub mod text;

pub use error::{Error, Result};
pub use kg::{load_triples, EntityId, KnowledgeGraph, RelationId, Subgraph, Triple};
