use serde::{Deserialize, Serialize};

use super::PreprocessConfig;
use crate::error::{Error, Result};
use crate::kg::{EntityId, Subgraph};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EntityScore {
    pub entity: EntityId,
    pub score: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct PprOutcome {
    /// One score per subgraph node, in node order.
    pub scores: Vec<EntityScore>,
    pub iterations: usize,
    pub converged: bool,
}

/// Personalized PageRank by power iteration over the direction-agnostic
/// random walk of `sg`, restarting uniformly on the seeds present in it.
///
/// Walk mass that reaches a node without edges teleports back to the seeds.
pub fn ppr_scores(sg: &Subgraph, seeds: &[EntityId], cfg: &PreprocessConfig) -> Result<PprOutcome> {
    let n = sg.node_count();
    let mut restart = vec![0.0; n];
    let local_seeds: Vec<usize> = seeds.iter().filter_map(|&s| sg.local_index(s)).collect();
    if local_seeds.is_empty() {
        return Err(Error::EmptySeeds);
    }
    let share = 1.0 / local_seeds.len() as f64;
    for &s in &local_seeds {
        restart[s] = share;
    }

    let adj = sg.local_adjacency();
    let alpha = cfg.alpha;
    let mut rank = restart.clone();
    let mut next = vec![0.0; n];
    let mut iterations = 0;
    let mut converged = false;

    while iterations < cfg.max_iter {
        iterations += 1;
        let dangling: f64 = (0..n).filter(|&v| adj[v].is_empty()).map(|v| rank[v]).sum();
        let restart_mass = (1.0 - alpha) + alpha * dangling;
        for (slot, r) in next.iter_mut().zip(&restart) {
            *slot = restart_mass * r;
        }
        for (v, list) in adj.iter().enumerate() {
            if list.is_empty() {
                continue;
            }
            let push = alpha * rank[v] / list.len() as f64;
            for nb in list {
                next[nb.node] += push;
            }
        }
        let change: f64 = rank.iter().zip(&next).map(|(a, b)| (a - b).abs()).sum();
        std::mem::swap(&mut rank, &mut next);
        if change < cfg.epsilon {
            converged = true;
            break;
        }
    }

    let total: f64 = rank.iter().sum();
    if total > 0.0 {
        rank.iter_mut().for_each(|r| *r /= total);
    }
    Ok(PprOutcome {
        scores: sg
            .nodes()
            .iter()
            .zip(rank)
            .map(|(&entity, score)| EntityScore { entity, score })
            .collect(),
        iterations,
        converged,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::kg::load_triples;

    #[test]
    fn single_node_holds_all_mass() {
        let g = load_triples("A\tr\tB".as_bytes()).unwrap();
        let seeds = g.resolve_seeds(&["A"]).unwrap();
        let sg = g.khop_subgraph(&seeds, 0).unwrap();
        let out = ppr_scores(&sg, &seeds, &PreprocessConfig::default()).unwrap();
        assert_eq!(out.scores.len(), 1);
        assert!((out.scores[0].score - 1.0).abs() < 1e-12);
    }

    #[test]
    fn symmetric_pair_splits_evenly() {
        let g = load_triples("A\tr\tB\nB\tr\tA".as_bytes()).unwrap();
        let seeds = g.resolve_seeds(&["A", "B"]).unwrap();
        let sg = g.khop_subgraph(&seeds, 1).unwrap();
        let out = ppr_scores(&sg, &seeds, &PreprocessConfig::default()).unwrap();
        for s in &out.scores {
            assert!((s.score - 0.5).abs() < 1e-12);
        }
        assert!(out.converged);
    }

    #[test]
    fn seed_outside_subgraph_is_an_error() {
        let g = load_triples("A\tr\tB\nC\tr\tD".as_bytes()).unwrap();
        let a = g.resolve_seeds(&["A"]).unwrap();
        let c = g.resolve_seeds(&["C"]).unwrap();
        let sg = g.khop_subgraph(&a, 1).unwrap();
        assert!(matches!(
            ppr_scores(&sg, &c, &PreprocessConfig::default()),
            Err(Error::EmptySeeds)
        ));
    }

    #[test]
    fn seed_scores_highest_on_a_star() {
        let g = load_triples("H\tr\tA\nH\tr\tB\nH\tr\tC\nC\tr\tD".as_bytes()).unwrap();
        let seeds = g.resolve_seeds(&["A"]).unwrap();
        let sg = g.khop_subgraph(&seeds, 3).unwrap();
        let out = ppr_scores(&sg, &seeds, &PreprocessConfig::default()).unwrap();
        let a = out
            .scores
            .iter()
            .find(|s| s.entity == seeds[0])
            .unwrap()
            .score;
        let d = out
            .scores
            .iter()
            .find(|s| s.entity == g.entity_id("D").unwrap())
            .unwrap()
            .score;
        assert!(a > d);
        let total: f64 = out.scores.iter().map(|s| s.score).sum();
        assert!((total - 1.0).abs() < 1e-9);
    }
}
