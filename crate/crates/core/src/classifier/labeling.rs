//! Min-hop labeling of training queries against the knowledge graph.

use std::collections::VecDeque;

use super::model::{Complexity, ComplexityLabel};
use crate::error::{Error, Result};
use crate::kg::{EntityId, KnowledgeGraph};

fn resolve<S: AsRef<str>>(
    graph: &KnowledgeGraph,
    names: &[S],
    what: &str,
) -> Result<Vec<EntityId>> {
    let mut ids: Vec<EntityId> = names
        .iter()
        .filter_map(|n| {
            let id = graph.entity_id(n.as_ref());
            if id.is_none() {
                log::debug!("{what} entity `{}` not in graph", n.as_ref());
            }
            id
        })
        .collect();
    ids.sort_unstable();
    ids.dedup();
    if ids.is_empty() {
        return Err(Error::Labeling(format!(
            "no {what} entity is present in the graph"
        )));
    }
    Ok(ids)
}

/// Fewest hops (direction-agnostic) from any query entity to any answer
/// entity; `None` when no pair is connected.
pub fn compute_min_hop<Q: AsRef<str>, A: AsRef<str>>(
    graph: &KnowledgeGraph,
    query_entities: &[Q],
    answer_entities: &[A],
) -> Result<Option<usize>> {
    let sources = resolve(graph, query_entities, "query")?;
    let targets = resolve(graph, answer_entities, "answer")?;

    let mut is_target = vec![false; graph.entity_count()];
    for t in &targets {
        is_target[t.index()] = true;
    }
    let mut dist = vec![usize::MAX; graph.entity_count()];
    let mut queue = VecDeque::new();
    for &s in &sources {
        if is_target[s.index()] {
            return Ok(Some(0));
        }
        dist[s.index()] = 0;
        queue.push_back(s);
    }
    while let Some(v) = queue.pop_front() {
        let d = dist[v.index()];
        for nb in graph.adjacent(v) {
            let u = nb.entity.index();
            if dist[u] == usize::MAX {
                if is_target[u] {
                    return Ok(Some(d + 1));
                }
                dist[u] = d + 1;
                queue.push_back(nb.entity);
            }
        }
    }
    Ok(None)
}

/// `Simple` iff `min_hop <= delta`.
pub fn label_query(min_hop: usize, delta: usize) -> ComplexityLabel {
    let value = if min_hop <= delta {
        Complexity::Simple
    } else {
        Complexity::Complex
    };
    ComplexityLabel {
        value,
        min_hop: Some(min_hop),
    }
}
