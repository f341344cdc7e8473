//! Subgraph pruning ahead of path retrieval: Personalized PageRank over
//! entities, then query-conditioned edge ranking.

mod ppr;
mod prune;
mod ranker;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub use ppr::{ppr_scores, EntityScore, PprOutcome};
pub use prune::{prune_entities, rank_edges, EdgeScore};
pub use ranker::{
    lexical_edge_score, lexical_score, LexicalRanker, RankRequest, RankResponse, Ranker,
    RemoteRanker,
};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PreprocessConfig {
    pub k_simple: usize,
    pub k_complex: usize,
    /// Entities kept after PPR pruning.
    pub n: usize,
    /// Edges kept after edge ranking.
    pub m: usize,
    /// PPR damping: probability of following an edge rather than restarting.
    pub alpha: f64,
    pub max_iter: usize,
    /// L1 change between iterations below which PPR stops.
    pub epsilon: f64,
}

impl Default for PreprocessConfig {
    fn default() -> Self {
        Self {
            k_simple: 2,
            k_complex: 4,
            n: 2000,
            m: 64,
            alpha: 0.8,
            max_iter: 1000,
            epsilon: 1e-10,
        }
    }
}

impl PreprocessConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.alpha > 0.0 && self.alpha < 1.0) {
            return Err(Error::Config(format!(
                "alpha must be in (0, 1), got {}",
                self.alpha
            )));
        }
        if self.n == 0 || self.m == 0 || self.max_iter == 0 {
            return Err(Error::Config("n, m and max_iter must be positive".into()));
        }
        if self.k_simple == 0 || self.k_complex == 0 {
            return Err(Error::Config("hop bounds must be positive".into()));
        }
        if !(self.epsilon.is_finite() && self.epsilon >= 0.0) {
            return Err(Error::Config(
                "epsilon must be a non-negative number".into(),
            ));
        }
        Ok(())
    }
}
