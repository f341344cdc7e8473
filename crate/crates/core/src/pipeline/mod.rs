//! End-to-end query answering and batch evaluation.

mod config;
mod eval;
mod run;

pub use config::{PipelineConfig, RankerKind};
pub use eval::{evaluate, hits_at_1, EvalReport, Evaluation, HopBucket};
pub use run::{
    build_chat_client, build_ranker, run_query, Algorithm, Engine, GraphSize, QueryOutcome,
    QueryTrace, RouteMode, Stage, StageError,
};
