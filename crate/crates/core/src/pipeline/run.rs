use std::time::Duration;

use serde::{Deserialize, Serialize};

use super::config::{PipelineConfig, RankerKind};
use super::eval::hits_at_1;
use crate::classifier::{ClassifierModel, Complexity, ComplexityLabel};
use crate::dataset::DatasetRecord;
use crate::error::Result;
use crate::kg::KnowledgeGraph;
use crate::llm::{
    generate, parse_feedback, render_prompt, ChatClient, CountingClient, LlmClient, LlmResponse,
    PromptKind,
};
use crate::preprocess::{
    ppr_scores, prune_entities, rank_edges, LexicalRanker, Ranker, RemoteRanker,
};
use crate::ranking::{rank_paths, RankedPaths};
use crate::retrieval::{bfs_all_paths, dijkstra_shortest_paths};

/// How a query picks its pipeline.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum RouteMode {
    #[default]
    Auto,
    Simple,
    Complex,
}

impl RouteMode {
    pub fn forced(self) -> Option<Complexity> {
        match self {
            RouteMode::Auto => None,
            RouteMode::Simple => Some(Complexity::Simple),
            RouteMode::Complex => Some(Complexity::Complex),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Algorithm {
    Bfs,
    Dijkstra,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Stage {
    Classify,
    Seeds,
    Subgraph,
    Prune,
    EdgeRanking,
    PathRanking,
    Generate,
    Feedback,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StageError {
    pub stage: Stage,
    pub message: String,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct GraphSize {
    pub nodes: usize,
    pub edges: usize,
}

/// Everything recorded about one query, one JSON object per line in the
/// trace log.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct QueryTrace {
    pub id: String,
    pub question: String,
    pub route: Option<Complexity>,
    pub forced: bool,
    /// Classifier probability of the chosen route (absent when forced).
    pub probability: Option<f64>,
    pub model_version: Option<u64>,
    pub k: Option<usize>,
    pub algorithm: Option<Algorithm>,
    pub seeds_requested: usize,
    pub seeds_found: usize,
    pub empty_seed: bool,
    pub khop: Option<GraphSize>,
    pub pruned: Option<GraphSize>,
    pub edge_ranked: Option<GraphSize>,
    pub ppr_iterations: Option<usize>,
    pub ppr_converged: Option<bool>,
    pub paths_retrieved: usize,
    pub truncated: bool,
    pub paths_ranked: usize,
    pub top_paths: Vec<String>,
    pub retrieval_llm_calls: usize,
    pub generation_llm_calls: usize,
    pub answer: Option<String>,
    pub hit: Option<bool>,
    pub gold_in_ranked: Option<bool>,
    pub gold_min_hop: Option<usize>,
    pub feedback_path: Option<String>,
    pub feedback_label: Option<Complexity>,
    pub errors: Vec<StageError>,
}

impl QueryTrace {
    fn fail(&mut self, stage: Stage, message: impl ToString) {
        let message = message.to_string();
        log::warn!("query {}: {:?} failed: {message}", self.id, stage);
        self.errors.push(StageError { stage, message });
    }

    pub fn llm_errors(&self) -> usize {
        self.errors
            .iter()
            .filter(|e| matches!(e.stage, Stage::Generate | Stage::Feedback))
            .count()
    }
}

#[derive(Debug, Clone)]
pub struct QueryOutcome {
    pub answer: Option<String>,
    pub response: Option<LlmResponse>,
    /// Refined label from the feedback prompt, if one was requested and
    /// the LLM named a path.
    pub feedback: Option<ComplexityLabel>,
    pub trace: QueryTrace,
}

/// Shared, read-only state for answering queries.
pub struct Engine<'a> {
    pub graph: &'a KnowledgeGraph,
    pub config: &'a PipelineConfig,
    pub ranker: &'a dyn Ranker,
    pub llm: &'a dyn LlmClient,
}

pub fn build_ranker(config: &PipelineConfig) -> Box<dyn Ranker> {
    match (config.ranker, &config.ranker_endpoint) {
        (RankerKind::Remote, Some(endpoint)) => Box::new(RemoteRanker::new(
            endpoint.clone(),
            Duration::from_millis(config.ranker_timeout_ms),
        )),
        _ => Box::new(LexicalRanker::default()),
    }
}

pub fn build_chat_client(config: &PipelineConfig) -> ChatClient {
    ChatClient::from_env(
        config.llm_endpoint.clone(),
        &config.llm_api_key_env,
        Duration::from_millis(config.llm_timeout_ms),
        config.retry(),
        config.llm_max_in_flight,
    )
}

fn gold_terminates(graph: &KnowledgeGraph, ranked: &RankedPaths, gold: &[String]) -> bool {
    ranked.entries.iter().any(|p| {
        let end = graph.entity_name(p.path.end());
        gold.iter().any(|g| g.trim() == end)
    })
}

fn retrieve(
    engine: &Engine,
    record: &DatasetRecord,
    route: Complexity,
    trace: &mut QueryTrace,
) -> Option<RankedPaths> {
    let cfg = engine.config;
    let graph = engine.graph;
    let pre = cfg.preprocess();

    let seeds = match graph.resolve_seeds(&record.question_entities) {
        Ok(s) => s,
        Err(e) => {
            trace.empty_seed = true;
            trace.fail(Stage::Seeds, e);
            return None;
        }
    };
    trace.seeds_found = seeds.len();

    let (k, algorithm) = match route {
        Complexity::Simple => (cfg.k_simple, Algorithm::Bfs),
        Complexity::Complex => (cfg.k_complex, Algorithm::Dijkstra),
    };
    trace.k = Some(k);
    trace.algorithm = Some(algorithm);

    let gk = match graph.khop_subgraph(&seeds, k) {
        Ok(g) => g,
        Err(e) => {
            trace.fail(Stage::Subgraph, e);
            return None;
        }
    };
    let size = |g: &crate::kg::Subgraph| GraphSize {
        nodes: g.node_count(),
        edges: g.edge_count(),
    };
    trace.khop = Some(size(&gk));

    let pruned = ppr_scores(&gk, &seeds, &pre).and_then(|ppr| {
        trace.ppr_iterations = Some(ppr.iterations);
        trace.ppr_converged = Some(ppr.converged);
        prune_entities(&gk, &ppr.scores, cfg.n)
    });
    let pruned = match pruned {
        Ok(g) => g,
        Err(e) => {
            trace.fail(Stage::Prune, e);
            return None;
        }
    };
    trace.pruned = Some(size(&pruned));

    let top = match rank_edges(graph, &record.question, &pruned, engine.ranker, cfg.m) {
        Ok((g, _)) => g,
        Err(e) => {
            trace.fail(Stage::EdgeRanking, e);
            return None;
        }
    };
    trace.edge_ranked = Some(size(&top));

    let found = match algorithm {
        Algorithm::Bfs => bfs_all_paths(&top, &seeds, cfg.path_limits(k)),
        Algorithm::Dijkstra => dijkstra_shortest_paths(&top, &seeds),
    };
    trace.paths_retrieved = found.paths.len();
    trace.truncated = found.truncated;

    match rank_paths(graph, &record.question, &found.paths, engine.ranker, cfg.u) {
        Ok(r) => {
            trace.paths_ranked = r.len();
            trace.top_paths = r.texts().map(str::to_string).collect();
            Some(r)
        }
        Err(e) => {
            trace.fail(Stage::PathRanking, e);
            None
        }
    }
}

/// Answers one record: classify (or take the forced route), extract and
/// prune the subgraph, retrieve and rank paths, then prompt the LLM. With
/// `want_feedback`, a second prompt asks for the correct reasoning path.
///
/// Stage failures are recorded in the trace and yield a null answer.
pub fn run_query(
    engine: &Engine,
    model: Option<&ClassifierModel>,
    record: &DatasetRecord,
    mode: RouteMode,
    want_feedback: bool,
) -> QueryOutcome {
    let mut trace = QueryTrace {
        id: record.id.clone(),
        question: record.question.clone(),
        seeds_requested: record.question_entities.len(),
        model_version: model.map(|m| m.version),
        ..QueryTrace::default()
    };
    let outcome = |trace: QueryTrace| QueryOutcome {
        answer: None,
        response: None,
        feedback: None,
        trace,
    };

    let route = match (mode.forced(), model) {
        (Some(r), _) => {
            trace.forced = true;
            r
        }
        (None, Some(m)) => match m.predict(&record.question) {
            Ok(p) => {
                trace.probability = Some(p.probability);
                p.label
            }
            Err(e) => {
                trace.fail(Stage::Classify, e);
                return outcome(trace);
            }
        },
        (None, None) => {
            trace.fail(Stage::Classify, "no classifier model and no forced route");
            return outcome(trace);
        }
    };
    trace.route = Some(route);

    let counter = CountingClient::new(engine.llm);
    let ranked = retrieve(engine, record, route, &mut trace);
    trace.retrieval_llm_calls = counter.calls();
    let Some(ranked) = ranked else {
        return outcome(trace);
    };
    if !record.answers.is_empty() {
        trace.gold_in_ranked = Some(gold_terminates(engine.graph, &ranked, &record.answers));
    }

    let params = engine.config.generation();
    let prompt = render_prompt(&record.question, &ranked, PromptKind::Answer);
    let response = match generate(&counter, &prompt, PromptKind::Answer, &params) {
        Ok(r) => r,
        Err(e) => {
            trace.fail(Stage::Generate, e);
            trace.generation_llm_calls = counter.calls() - trace.retrieval_llm_calls;
            return outcome(trace);
        }
    };
    let answer = response
        .raw_text
        .lines()
        .map(str::trim)
        .find(|l| !l.is_empty())
        .unwrap_or("")
        .to_string();
    trace.answer = Some(answer.clone());
    if !record.answers.is_empty() {
        trace.hit = Some(hits_at_1(&response, &record.answers));
    }

    let mut feedback = None;
    if want_feedback {
        let prompt = render_prompt(&record.question, &ranked, PromptKind::Feedback);
        match generate(&counter, &prompt, PromptKind::Feedback, &params) {
            Ok(r) => {
                trace.feedback_path = r.feedback_path.clone();
                feedback = parse_feedback(&r, engine.config.delta);
                trace.feedback_label = feedback.map(|l| l.value);
            }
            Err(e) => trace.fail(Stage::Feedback, e),
        }
    }
    trace.generation_llm_calls = counter.calls() - trace.retrieval_llm_calls;

    QueryOutcome {
        answer: Some(answer),
        response: Some(response),
        feedback,
        trace,
    }
}

pub(crate) fn check_engine(engine: &Engine) -> Result<()> {
    engine.config.validate()
}
