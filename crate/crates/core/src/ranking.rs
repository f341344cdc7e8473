//! Postprocessing: score retrieved paths against the query and keep the top `u`.

use std::cmp::Ordering;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::kg::KnowledgeGraph;
use crate::preprocess::Ranker;
use crate::retrieval::ReasoningPath;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RankedPath {
    pub path: ReasoningPath,
    /// Rendered form, identical to what the prompt will contain.
    pub text: String,
    pub score: f64,
}

/// Paths in rank order: score descending, ties by rendered text.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct RankedPaths {
    pub entries: Vec<RankedPath>,
    pub u: usize,
}

impl RankedPaths {
    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn texts(&self) -> impl Iterator<Item = &str> {
        self.entries.iter().map(|e| e.text.as_str())
    }
}

pub fn rank_paths(
    graph: &KnowledgeGraph,
    query: &str,
    paths: &[ReasoningPath],
    ranker: &dyn Ranker,
    u: usize,
) -> Result<RankedPaths> {
    if u == 0 {
        return Err(Error::Config("path budget u must be positive".into()));
    }
    if paths.is_empty() {
        return Ok(RankedPaths {
            entries: Vec::new(),
            u,
        });
    }
    let texts: Vec<String> = paths.iter().map(|p| p.render(graph)).collect();
    let scores = ranker.score(query, &texts);
    if scores.len() != texts.len() {
        return Err(Error::Config(format!(
            "ranker `{}` returned {} scores for {} paths",
            ranker.name(),
            scores.len(),
            texts.len()
        )));
    }
    let mut entries: Vec<RankedPath> = paths
        .iter()
        .zip(texts)
        .zip(scores)
        .map(|((path, text), score)| RankedPath {
            path: path.clone(),
            text,
            score,
        })
        .collect();
    entries.sort_by(|a, b| {
        b.score
            .partial_cmp(&a.score)
            .unwrap_or(Ordering::Equal)
            .then_with(|| a.text.cmp(&b.text))
            .then_with(|| a.path.cmp(&b.path))
    });
    entries.truncate(u);
    Ok(RankedPaths { entries, u })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::kg::load_triples;
    use crate::preprocess::LexicalRanker;
    use crate::retrieval::{bfs_all_paths, PathLimits};

    fn fixture() -> (KnowledgeGraph, Vec<ReasoningPath>) {
        let g = load_triples(
            "Alien\tfilm.director\tRidley\nAlien\tfilm.genre\tHorror\nRidley\tperson.birthplace\tShields\n"
                .as_bytes(),
        )
        .unwrap();
        let seeds = g.resolve_seeds(&["Alien"]).unwrap();
        let sg = g.khop_subgraph(&seeds, 2).unwrap();
        let paths = bfs_all_paths(&sg, &seeds, PathLimits::new(2)).paths;
        (g, paths)
    }

    #[test]
    fn keeps_all_when_budget_is_large() {
        let (g, paths) = fixture();
        let ranked = rank_paths(
            &g,
            "who directed Alien",
            &paths,
            &LexicalRanker::default(),
            32,
        )
        .unwrap();
        assert_eq!(ranked.len(), paths.len());
        assert!(ranked.entries.windows(2).all(|w| w[0].score >= w[1].score));
    }

    #[test]
    fn matching_relation_ranks_first() {
        let (g, paths) = fixture();
        let ranked =
            rank_paths(&g, "Alien director", &paths, &LexicalRanker::default(), 1).unwrap();
        assert_eq!(ranked.entries[0].text, "Alien → film.director → Ridley");
    }

    #[test]
    fn empty_input_and_zero_budget() {
        let (g, _) = fixture();
        let r = rank_paths(&g, "q", &[], &LexicalRanker::default(), 32).unwrap();
        assert!(r.is_empty());
        assert!(rank_paths(&g, "q", &[], &LexicalRanker::default(), 0).is_err());
    }
}
