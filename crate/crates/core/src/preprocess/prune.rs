use std::cmp::Ordering;

use serde::{Deserialize, Serialize};

use super::ppr::EntityScore;
use super::ranker::Ranker;
use crate::error::{Error, Result};
use crate::kg::{Edge, EntityId, KnowledgeGraph, Subgraph};
use crate::retrieval::render_edge;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EdgeScore {
    pub edge: Edge,
    pub score: f64,
}

/// Keeps the `n` best-scored entities (ties by id) plus every seed, and the
/// edges among them.
pub fn prune_entities(sg: &Subgraph, scores: &[EntityScore], n: usize) -> Result<Subgraph> {
    if n == 0 {
        return Err(Error::Config("entity budget n must be positive".into()));
    }
    let mut ranked: Vec<&EntityScore> = scores
        .iter()
        .filter(|s| sg.contains_node(s.entity))
        .collect();
    ranked.sort_by(|a, b| {
        b.score
            .partial_cmp(&a.score)
            .unwrap_or(Ordering::Equal)
            .then(a.entity.cmp(&b.entity))
    });
    let mut kept: Vec<EntityId> = ranked.iter().take(n).map(|s| s.entity).collect();
    kept.extend_from_slice(sg.seeds());
    Ok(Subgraph::new(
        kept,
        sg.edges().to_vec(),
        sg.seeds().to_vec(),
        sg.order(),
    ))
}

/// Scores every edge of `sg` against the query and keeps the `m` best
/// (score descending, then edge key) with their endpoints. Seeds stay in the
/// node set so retrieval can still start from them.
pub fn rank_edges(
    graph: &KnowledgeGraph,
    query: &str,
    sg: &Subgraph,
    ranker: &dyn Ranker,
    m: usize,
) -> Result<(Subgraph, Vec<EdgeScore>)> {
    if m == 0 {
        return Err(Error::Config("edge budget m must be positive".into()));
    }
    if sg.edges().is_empty() {
        log::warn!("edge ranking on a subgraph without edges; no paths will be found");
        let seeds = sg.seeds().to_vec();
        return Ok((
            Subgraph::new(seeds.clone(), Vec::new(), seeds, sg.order()),
            Vec::new(),
        ));
    }

    let texts: Vec<String> = sg.edges().iter().map(|e| render_edge(graph, e)).collect();
    let raw = ranker.score(query, &texts);
    if raw.len() != texts.len() {
        return Err(Error::Config(format!(
            "ranker `{}` returned {} scores for {} edges",
            ranker.name(),
            raw.len(),
            texts.len()
        )));
    }
    let mut scored: Vec<EdgeScore> = sg
        .edges()
        .iter()
        .zip(raw)
        .map(|(&edge, score)| EdgeScore { edge, score })
        .collect();
    scored.sort_by(|a, b| {
        b.score
            .partial_cmp(&a.score)
            .unwrap_or(Ordering::Equal)
            .then(a.edge.cmp(&b.edge))
    });
    scored.truncate(m);

    let edges: Vec<Edge> = scored.iter().map(|s| s.edge).collect();
    let mut nodes: Vec<EntityId> = edges.iter().flat_map(|e| [e.subject, e.object]).collect();
    nodes.extend(sg.seeds().iter().filter(|&&s| sg.contains_node(s)));
    Ok((
        Subgraph::new(nodes, edges, sg.seeds().to_vec(), sg.order()),
        scored,
    ))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::kg::load_triples;
    use crate::preprocess::{ppr_scores, LexicalRanker, PreprocessConfig};

    fn star() -> KnowledgeGraph {
        load_triples(
            "S\tfilm.director\tD\nS\tlocation.capital\tC\nS\tfilm.genre\tG\nD\tperson.spouse\tW\n"
                .as_bytes(),
        )
        .unwrap()
    }

    #[test]
    fn large_budget_keeps_everything() {
        let g = star();
        let seeds = g.resolve_seeds(&["S"]).unwrap();
        let sg = g.khop_subgraph(&seeds, 2).unwrap();
        let ppr = ppr_scores(&sg, &seeds, &PreprocessConfig::default()).unwrap();
        let pruned = prune_entities(&sg, &ppr.scores, 100).unwrap();
        assert_eq!(pruned, sg);
    }

    #[test]
    fn budget_of_one_keeps_seed() {
        let g = star();
        let seeds = g.resolve_seeds(&["W"]).unwrap();
        let sg = g.khop_subgraph(&seeds, 2).unwrap();
        // adversarial scores that rank the seed last
        let scores: Vec<EntityScore> = sg
            .nodes()
            .iter()
            .map(|&entity| EntityScore {
                entity,
                score: if entity == seeds[0] { 0.0 } else { 1.0 },
            })
            .collect();
        let pruned = prune_entities(&sg, &scores, 1).unwrap();
        assert!(pruned.contains_node(seeds[0]));
        assert_eq!(pruned.node_count(), 2);
        assert!(pruned.is_subgraph_of(&sg));
    }

    #[test]
    fn zero_budgets_are_errors() {
        let g = star();
        let seeds = g.resolve_seeds(&["S"]).unwrap();
        let sg = g.khop_subgraph(&seeds, 1).unwrap();
        assert!(prune_entities(&sg, &[], 0).is_err());
        assert!(rank_edges(&g, "q", &sg, &LexicalRanker::default(), 0).is_err());
    }

    #[test]
    fn director_edge_ranked_first() {
        let g = star();
        let seeds = g.resolve_seeds(&["S"]).unwrap();
        let sg = g.khop_subgraph(&seeds, 1).unwrap();
        let (top, scores) =
            rank_edges(&g, "film director", &sg, &LexicalRanker::default(), 1).unwrap();
        assert_eq!(top.edge_count(), 1);
        assert_eq!(g.relation_name(scores[0].edge.relation), "film.director");
        assert!(top.is_subgraph_of(&sg));
    }

    #[test]
    fn output_size_is_min_of_m_and_edges() {
        let g = star();
        let seeds = g.resolve_seeds(&["S"]).unwrap();
        let sg = g.khop_subgraph(&seeds, 2).unwrap();
        for m in 1..7 {
            let (top, _) = rank_edges(&g, "film", &sg, &LexicalRanker::default(), m).unwrap();
            assert_eq!(top.edge_count(), m.min(sg.edge_count()));
        }
        let (all, _) = rank_edges(&g, "film", &sg, &LexicalRanker::default(), 64).unwrap();
        assert_eq!(all.edges(), sg.edges());
    }

    #[test]
    fn no_edges_yields_seed_only_subgraph() {
        let g = star();
        let seeds = g.resolve_seeds(&["S"]).unwrap();
        let sg = g.khop_subgraph(&seeds, 0).unwrap();
        let (top, scores) = rank_edges(&g, "film", &sg, &LexicalRanker::default(), 4).unwrap();
        assert!(scores.is_empty());
        assert_eq!(top.nodes(), seeds.as_slice());
    }
}
