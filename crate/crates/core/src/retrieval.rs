//! Reasoning-path retrieval over a pruned subgraph.
//!
//! Simple queries enumerate every simple path from each seed breadth-first;
//! complex queries take one unit-weight shortest path per reachable target.
//! Both walk edges in either direction and record which way each hop went.

use std::cmp::Reverse;
use std::collections::{BinaryHeap, VecDeque};

use serde::{Deserialize, Serialize};

use crate::kg::{Edge, EntityId, KnowledgeGraph, LocalNeighbor, Orientation, RelationId, Subgraph};

/// Separator between entities and relations in rendered paths.
pub const SEPARATOR: &str = " → ";
/// Suffix marking a relation walked against its stored direction.
pub const INVERSE_MARK: &str = "⁻¹";

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct Hop {
    pub relation: RelationId,
    pub orientation: Orientation,
    pub entity: EntityId,
}

/// `start →r1→ m1 → … →rl→ end`, with no repeated entity.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct ReasoningPath {
    pub start: EntityId,
    pub hops: Vec<Hop>,
}

impl ReasoningPath {
    pub fn hop_count(&self) -> usize {
        self.hops.len()
    }

    pub fn end(&self) -> EntityId {
        self.hops.last().map_or(self.start, |h| h.entity)
    }

    pub fn entities(&self) -> impl Iterator<Item = EntityId> + '_ {
        std::iter::once(self.start).chain(self.hops.iter().map(|h| h.entity))
    }

    /// The stored edges walked by this path, in order.
    pub fn edges(&self) -> impl Iterator<Item = Edge> + '_ {
        let froms = self.entities();
        froms
            .zip(&self.hops)
            .map(|(from, hop)| match hop.orientation {
                Orientation::Forward => Edge {
                    subject: from,
                    relation: hop.relation,
                    object: hop.entity,
                },
                Orientation::Inverse => Edge {
                    subject: hop.entity,
                    relation: hop.relation,
                    object: from,
                },
            })
    }

    pub fn is_simple(&self) -> bool {
        let mut seen: Vec<EntityId> = self.entities().collect();
        seen.sort_unstable();
        seen.windows(2).all(|w| w[0] != w[1])
    }

    /// Canonical text form shared by ranking, prompts and feedback parsing.
    pub fn render(&self, graph: &KnowledgeGraph) -> String {
        let mut out = graph.entity_name(self.start).to_string();
        for hop in &self.hops {
            out.push_str(SEPARATOR);
            out.push_str(graph.relation_name(hop.relation));
            if hop.orientation == Orientation::Inverse {
                out.push_str(INVERSE_MARK);
            }
            out.push_str(SEPARATOR);
            out.push_str(graph.entity_name(hop.entity));
        }
        out
    }
}

/// Single edge in path form: `subject → relation → object`.
pub fn render_edge(graph: &KnowledgeGraph, edge: &Edge) -> String {
    format!(
        "{}{SEPARATOR}{}{SEPARATOR}{}",
        graph.entity_name(edge.subject),
        graph.relation_name(edge.relation),
        graph.entity_name(edge.object)
    )
}

/// Splits a rendered path into its alternating entity/relation segments.
/// Returns `None` unless there is at least one relation.
pub fn split_rendered(text: &str) -> Option<Vec<&str>> {
    let parts: Vec<&str> = text.trim().split(SEPARATOR).map(str::trim).collect();
    if parts.len() < 3 || parts.len().is_multiple_of(2) || parts.iter().any(|p| p.is_empty()) {
        return None;
    }
    Some(parts)
}

/// Hop count of a rendered path.
pub fn rendered_hops(text: &str) -> Option<usize> {
    split_rendered(text).map(|p| (p.len() - 1) / 2)
}

/// Last entity of a rendered path.
pub fn rendered_terminal(text: &str) -> Option<&str> {
    split_rendered(text).and_then(|p| p.last().copied())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct PathLimits {
    pub max_hops: usize,
    pub max_paths: usize,
}

impl PathLimits {
    pub fn new(max_hops: usize) -> Self {
        Self {
            max_hops,
            max_paths: 10_000,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct Retrieved {
    pub paths: Vec<ReasoningPath>,
    /// Set when `max_paths` stopped the enumeration early.
    pub truncated: bool,
}

fn local_seeds(sg: &Subgraph, seeds: &[EntityId]) -> Vec<usize> {
    let mut local: Vec<usize> = seeds.iter().filter_map(|&s| sg.local_index(s)).collect();
    local.sort_unstable();
    local.dedup();
    local
}

fn to_path(sg: &Subgraph, start: usize, steps: &[LocalNeighbor]) -> ReasoningPath {
    let nodes = sg.nodes();
    ReasoningPath {
        start: nodes[start],
        hops: steps
            .iter()
            .map(|s| Hop {
                relation: s.relation,
                orientation: s.orientation,
                entity: nodes[s.node],
            })
            .collect(),
    }
}

/// Every simple path from each seed, found breadth-first: a path is recorded
/// each time it is extended to a neighbor not already on it.
pub fn bfs_all_paths(sg: &Subgraph, seeds: &[EntityId], limits: PathLimits) -> Retrieved {
    let adj = sg.local_adjacency();
    let mut out = Retrieved::default();

    'seeds: for s in local_seeds(sg, seeds) {
        let mut queue: VecDeque<(Vec<usize>, Vec<LocalNeighbor>)> = VecDeque::new();
        queue.push_back((vec![s], Vec::new()));
        while let Some((nodes, steps)) = queue.pop_front() {
            if steps.len() >= limits.max_hops {
                continue;
            }
            let v = *nodes.last().expect("path holds its start");
            for nb in &adj[v] {
                if nodes.contains(&nb.node) {
                    continue;
                }
                if out.paths.len() == limits.max_paths {
                    out.truncated = true;
                    break 'seeds;
                }
                let mut next_nodes = nodes.clone();
                next_nodes.push(nb.node);
                let mut next_steps = steps.clone();
                next_steps.push(*nb);
                out.paths.push(to_path(sg, s, &next_steps));
                queue.push_back((next_nodes, next_steps));
            }
        }
    }
    out
}

/// One shortest path (unit weights) from each seed to every other node it
/// reaches. Among equally short routes the lowest-id predecessor wins, and
/// among parallel edges the first in adjacency order.
pub fn dijkstra_shortest_paths(sg: &Subgraph, seeds: &[EntityId]) -> Retrieved {
    let adj = sg.local_adjacency();
    let n = sg.node_count();
    let mut out = Retrieved::default();

    for s in local_seeds(sg, seeds) {
        let mut dist = vec![u32::MAX; n];
        let mut pred: Vec<Option<(usize, LocalNeighbor)>> = vec![None; n];
        let mut heap = BinaryHeap::new();
        dist[s] = 0;
        heap.push(Reverse((0u32, s)));

        while let Some(Reverse((d, u))) = heap.pop() {
            if d > dist[u] {
                continue;
            }
            for nb in &adj[u] {
                let v = nb.node;
                let candidate = d + 1;
                if candidate < dist[v] {
                    dist[v] = candidate;
                    pred[v] = Some((u, *nb));
                    heap.push(Reverse((candidate, v)));
                } else if candidate == dist[v] && v != s {
                    if let Some((p, _)) = pred[v] {
                        if u < p {
                            pred[v] = Some((u, *nb));
                        }
                    }
                }
            }
        }

        for (t, &d) in dist.iter().enumerate() {
            if t == s || d == u32::MAX {
                continue;
            }
            let mut steps = Vec::with_capacity(d as usize);
            let mut v = t;
            while let Some((p, step)) = pred[v] {
                steps.push(step);
                v = p;
            }
            steps.reverse();
            out.paths.push(to_path(sg, s, &steps));
        }
    }
    out
}
