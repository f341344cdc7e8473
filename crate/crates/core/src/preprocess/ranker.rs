//! Text rankers used to score edges and reasoning paths against a query.

use std::collections::{HashMap, HashSet};
use std::time::Duration;

use serde::{Deserialize, Serialize};

use crate::kg::Triple;
use crate::retrieval::SEPARATOR;
use crate::text;

/// Scores candidate texts against a query; higher means more relevant.
///
/// Implementations must return exactly one finite score per candidate and
/// be deterministic for a fixed input.
pub trait Ranker: Send + Sync {
    fn name(&self) -> &str;
    fn score(&self, query: &str, candidates: &[String]) -> Vec<f64>;
}

/// Term-overlap scorer with BM25 term-frequency saturation:
/// `Σ_{t ∈ query} tf(t)·(k1 + 1) / (tf(t) + k1)` over stemmed, stopword-free
/// terms. Query terms count once each; no document-frequency weighting, so a
/// score depends only on the (query, candidate) pair.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LexicalRanker {
    pub k1: f64,
}

impl Default for LexicalRanker {
    fn default() -> Self {
        Self { k1: 1.2 }
    }
}

impl LexicalRanker {
    fn score_terms(&self, query_terms: &HashSet<String>, candidate: &str) -> f64 {
        let mut tf: HashMap<String, usize> = HashMap::new();
        for term in text::content_terms(candidate) {
            if query_terms.contains(&term) {
                *tf.entry(term).or_default() += 1;
            }
        }
        let mut freqs: Vec<usize> = tf.into_values().collect();
        // fixed summation order keeps scores bit-stable
        freqs.sort_unstable();
        freqs
            .into_iter()
            .map(|f| {
                let f = f as f64;
                f * (self.k1 + 1.0) / (f + self.k1)
            })
            .sum()
    }
}

impl Ranker for LexicalRanker {
    fn name(&self) -> &str {
        "lexical"
    }

    fn score(&self, query: &str, candidates: &[String]) -> Vec<f64> {
        let query_terms: HashSet<String> = text::content_terms(query).into_iter().collect();
        candidates
            .iter()
            .map(|c| self.score_terms(&query_terms, c))
            .collect()
    }
}

/// Lexical score of a single candidate text with default parameters.
pub fn lexical_score(query: &str, candidate: &str) -> f64 {
    LexicalRanker::default().score(query, &[candidate.to_string()])[0]
}

/// Lexical score of an edge rendered as `subject → relation → object`.
pub fn lexical_edge_score(query: &str, edge: &Triple) -> f64 {
    lexical_score(
        query,
        &format!(
            "{}{SEPARATOR}{}{SEPARATOR}{}",
            edge.subject, edge.relation, edge.object
        ),
    )
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RankRequest {
    pub query: String,
    pub candidates: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RankResponse {
    pub scores: Vec<f64>,
}

/// Client for an HTTP scoring service. Any failure (timeout, bad status,
/// malformed or mis-sized reply) falls back to the lexical ranker.
#[derive(Debug, Clone)]
pub struct RemoteRanker {
    endpoint: String,
    agent: ureq::Agent,
    fallback: LexicalRanker,
}

impl RemoteRanker {
    pub fn new(endpoint: impl Into<String>, timeout: Duration) -> Self {
        let agent: ureq::Agent = ureq::Agent::config_builder()
            .timeout_global(Some(timeout))
            .http_status_as_error(false)
            .build()
            .into();
        Self {
            endpoint: endpoint.into(),
            agent,
            fallback: LexicalRanker::default(),
        }
    }

    pub fn endpoint(&self) -> &str {
        &self.endpoint
    }

    /// Calls the service without falling back.
    pub fn try_score(&self, query: &str, candidates: &[String]) -> Result<Vec<f64>, String> {
        let request = RankRequest {
            query: query.to_string(),
            candidates: candidates.to_vec(),
        };
        let mut response = self
            .agent
            .post(&self.endpoint)
            .send_json(&request)
            .map_err(|e| format!("transport: {e}"))?;
        let status = response.status().as_u16();
        let body = response
            .body_mut()
            .read_to_string()
            .map_err(|e| format!("reading body: {e}"))?;
        if !(200..300).contains(&status) {
            return Err(format!("status {status}"));
        }
        let parsed: RankResponse =
            serde_json::from_str(&body).map_err(|e| format!("malformed reply: {e}"))?;
        if parsed.scores.len() != candidates.len() {
            return Err(format!(
                "expected {} scores, got {}",
                candidates.len(),
                parsed.scores.len()
            ));
        }
        if parsed.scores.iter().any(|s| !s.is_finite()) {
            return Err("non-finite score in reply".into());
        }
        Ok(parsed.scores)
    }
}

impl Ranker for RemoteRanker {
    fn name(&self) -> &str {
        "remote"
    }

    fn score(&self, query: &str, candidates: &[String]) -> Vec<f64> {
        if candidates.is_empty() {
            return Vec::new();
        }
        match self.try_score(query, candidates) {
            Ok(scores) => scores,
            Err(e) => {
                log::warn!(
                    "remote ranker at {} failed ({e}); using lexical scores",
                    self.endpoint
                );
                self.fallback.score(query, candidates)
            }
        }
    }
}
