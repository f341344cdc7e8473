//! In-memory triple store with sorted adjacency indexes and k-hop subgraph
//! extraction.
//!
//! Entity and relation names are interned in lexicographic order, so the
//! numeric order of [`EntityId`] and [`RelationId`] equals the order of the
//! names they stand for. Every adjacency list is sorted, which makes all
//! traversals in this crate reproducible.

use std::collections::{HashMap, VecDeque};
use std::fmt;
use std::io::{BufRead, Write};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct EntityId(pub u32);

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct RelationId(pub u32);

impl EntityId {
    #[inline]
    pub fn index(self) -> usize {
        self.0 as usize
    }
}

impl RelationId {
    #[inline]
    pub fn index(self) -> usize {
        self.0 as usize
    }
}

/// A directed labeled edge `(subject, relation, object)` by name.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct Triple {
    pub subject: String,
    pub relation: String,
    pub object: String,
}

impl Triple {
    /// Builds a triple from trimmed fields; empty fields are rejected.
    pub fn new(subject: &str, relation: &str, object: &str) -> std::result::Result<Self, String> {
        let (s, r, o) = (subject.trim(), relation.trim(), object.trim());
        for (name, value) in [("subject", s), ("relation", r), ("object", o)] {
            if value.is_empty() {
                return Err(format!("empty {name} field"));
            }
        }
        Ok(Self {
            subject: s.to_string(),
            relation: r.to_string(),
            object: o.to_string(),
        })
    }
}

/// Interned triple. Ordering is `(subject, relation, object)`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct Edge {
    pub subject: EntityId,
    pub relation: RelationId,
    pub object: EntityId,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Direction {
    Out,
    In,
    Both,
}

/// Whether a traversal step follows the stored edge direction or walks
/// it backwards.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Orientation {
    Forward,
    Inverse,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Neighbor {
    pub relation: RelationId,
    pub entity: EntityId,
    pub orientation: Orientation,
}

impl Neighbor {
    /// The stored edge this step walks along, given the node it leaves from.
    pub fn edge_from(&self, from: EntityId) -> Edge {
        match self.orientation {
            Orientation::Forward => Edge {
                subject: from,
                relation: self.relation,
                object: self.entity,
            },
            Orientation::Inverse => Edge {
                subject: self.entity,
                relation: self.relation,
                object: from,
            },
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct GraphStats {
    pub entities: usize,
    pub relations: usize,
    pub triples: usize,
}

impl fmt::Display for GraphStats {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "{} entities, {} relations, {} triples",
            self.entities, self.relations, self.triples
        )
    }
}

/// Compressed adjacency: `items[offsets[v]..offsets[v + 1]]` are the entries of `v`.
#[derive(Debug, Clone, Default)]
struct Csr<T> {
    offsets: Vec<usize>,
    items: Vec<T>,
}

impl<T: Copy> Csr<T> {
    fn build(n: usize, mut pairs: Vec<(u32, T)>) -> Self
    where
        T: Ord,
    {
        pairs.sort_unstable();
        let mut offsets = vec![0usize; n + 1];
        for (v, _) in &pairs {
            offsets[*v as usize + 1] += 1;
        }
        for i in 0..n {
            offsets[i + 1] += offsets[i];
        }
        Self {
            offsets,
            items: pairs.into_iter().map(|(_, t)| t).collect(),
        }
    }

    #[inline]
    fn row(&self, v: usize) -> &[T] {
        &self.items[self.offsets[v]..self.offsets[v + 1]]
    }
}

/// Immutable, indexed knowledge graph.
#[derive(Debug, Clone)]
pub struct KnowledgeGraph {
    entities: Vec<String>,
    entity_index: HashMap<String, EntityId>,
    relations: Vec<String>,
    relation_index: HashMap<String, RelationId>,
    edges: Vec<Edge>,
    out_index: Csr<(RelationId, EntityId)>,
    in_index: Csr<(RelationId, EntityId)>,
    adjacency: Csr<Neighbor>,
}

impl KnowledgeGraph {
    /// Builds and indexes a graph; duplicate triples are stored once.
    pub fn from_triples<I>(triples: I) -> Result<Self>
    where
        I: IntoIterator<Item = Triple>,
    {
        let triples: Vec<Triple> = triples.into_iter().collect();
        if triples.is_empty() {
            return Err(Error::EmptyGraph);
        }

        let mut entities: Vec<String> = triples
            .iter()
            .flat_map(|t| [t.subject.clone(), t.object.clone()])
            .collect();
        entities.sort_unstable();
        entities.dedup();
        let mut relations: Vec<String> = triples.iter().map(|t| t.relation.clone()).collect();
        relations.sort_unstable();
        relations.dedup();

        let entity_index: HashMap<String, EntityId> = entities
            .iter()
            .enumerate()
            .map(|(i, e)| (e.clone(), EntityId(i as u32)))
            .collect();
        let relation_index: HashMap<String, RelationId> = relations
            .iter()
            .enumerate()
            .map(|(i, r)| (r.clone(), RelationId(i as u32)))
            .collect();

        let mut edges: Vec<Edge> = triples
            .iter()
            .map(|t| Edge {
                subject: entity_index[&t.subject],
                relation: relation_index[&t.relation],
                object: entity_index[&t.object],
            })
            .collect();
        edges.sort_unstable();
        edges.dedup();

        let n = entities.len();
        let out_index = Csr::build(
            n,
            edges
                .iter()
                .map(|e| (e.subject.0, (e.relation, e.object)))
                .collect(),
        );
        let in_index = Csr::build(
            n,
            edges
                .iter()
                .map(|e| (e.object.0, (e.relation, e.subject)))
                .collect(),
        );
        let adjacency = Csr::build(
            n,
            edges
                .iter()
                .flat_map(|e| {
                    [
                        (
                            e.subject.0,
                            Neighbor {
                                relation: e.relation,
                                entity: e.object,
                                orientation: Orientation::Forward,
                            },
                        ),
                        (
                            e.object.0,
                            Neighbor {
                                relation: e.relation,
                                entity: e.subject,
                                orientation: Orientation::Inverse,
                            },
                        ),
                    ]
                })
                .collect(),
        );

        Ok(Self {
            entities,
            entity_index,
            relations,
            relation_index,
            edges,
            out_index,
            in_index,
            adjacency,
        })
    }

    pub fn stats(&self) -> GraphStats {
        GraphStats {
            entities: self.entities.len(),
            relations: self.relations.len(),
            triples: self.edges.len(),
        }
    }

    pub fn entity_count(&self) -> usize {
        self.entities.len()
    }

    pub fn entity_id(&self, name: &str) -> Option<EntityId> {
        self.entity_index.get(name.trim()).copied()
    }

    pub fn relation_id(&self, name: &str) -> Option<RelationId> {
        self.relation_index.get(name.trim()).copied()
    }

    pub fn entity_name(&self, id: EntityId) -> &str {
        &self.entities[id.index()]
    }

    pub fn relation_name(&self, id: RelationId) -> &str {
        &self.relations[id.index()]
    }

    pub fn entities(&self) -> impl ExactSizeIterator<Item = &str> {
        self.entities.iter().map(String::as_str)
    }

    pub fn relations(&self) -> impl ExactSizeIterator<Item = &str> {
        self.relations.iter().map(String::as_str)
    }

    /// All stored edges in `(subject, relation, object)` order.
    pub fn edges(&self) -> &[Edge] {
        &self.edges
    }

    pub fn contains_edge(&self, edge: &Edge) -> bool {
        self.edges.binary_search(edge).is_ok()
    }

    pub fn triple(&self, edge: &Edge) -> Triple {
        Triple {
            subject: self.entity_name(edge.subject).to_string(),
            relation: self.relation_name(edge.relation).to_string(),
            object: self.entity_name(edge.object).to_string(),
        }
    }

    pub fn triples(&self) -> impl Iterator<Item = Triple> + '_ {
        self.edges.iter().map(|e| self.triple(e))
    }

    /// `(relation, object)` pairs leaving `v`, sorted.
    pub fn out_edges(&self, v: EntityId) -> &[(RelationId, EntityId)] {
        self.out_index.row(v.index())
    }

    /// `(relation, subject)` pairs entering `v`, sorted.
    pub fn in_edges(&self, v: EntityId) -> &[(RelationId, EntityId)] {
        self.in_index.row(v.index())
    }

    /// Direction-agnostic adjacency of `v`, sorted by relation, neighbor, orientation.
    pub fn adjacent(&self, v: EntityId) -> &[Neighbor] {
        self.adjacency.row(v.index())
    }

    /// Neighbors of a named entity, sorted by relation name then neighbor name.
    pub fn neighbors(&self, entity: &str, direction: Direction) -> Result<Vec<Neighbor>> {
        let v = self
            .entity_id(entity)
            .ok_or_else(|| Error::UnknownEntity(entity.to_string()))?;
        let tagged = |pairs: &[(RelationId, EntityId)], orientation| {
            pairs
                .iter()
                .map(move |&(relation, entity)| Neighbor {
                    relation,
                    entity,
                    orientation,
                })
                .collect::<Vec<_>>()
        };
        Ok(match direction {
            Direction::Out => tagged(self.out_edges(v), Orientation::Forward),
            Direction::In => tagged(self.in_edges(v), Orientation::Inverse),
            Direction::Both => self.adjacent(v).to_vec(),
        })
    }

    /// Resolves seed names, dropping (with a warning) those absent from the graph.
    pub fn resolve_seeds<S: AsRef<str>>(&self, names: &[S]) -> Result<Vec<EntityId>> {
        let mut ids = Vec::with_capacity(names.len());
        for name in names {
            match self.entity_id(name.as_ref()) {
                Some(id) => ids.push(id),
                None => log::warn!("dropping seed `{}`: not in graph", name.as_ref()),
            }
        }
        ids.sort_unstable();
        ids.dedup();
        if ids.is_empty() {
            return Err(Error::EmptySeeds);
        }
        Ok(ids)
    }

    /// Union of the `k`-hop balls around `seeds` (direction-agnostic), with
    /// every stored edge between the collected nodes.
    pub fn khop_subgraph(&self, seeds: &[EntityId], k: usize) -> Result<Subgraph> {
        let mut seeds = seeds.to_vec();
        seeds.sort_unstable();
        seeds.dedup();
        seeds.retain(|s| s.index() < self.entities.len());
        if seeds.is_empty() {
            return Err(Error::EmptySeeds);
        }

        let mut depth = vec![u32::MAX; self.entities.len()];
        let mut queue = VecDeque::new();
        let mut nodes = Vec::new();
        for &s in &seeds {
            depth[s.index()] = 0;
            queue.push_back(s);
            nodes.push(s);
        }
        while let Some(v) = queue.pop_front() {
            let d = depth[v.index()];
            if d as usize >= k {
                continue;
            }
            for nb in self.adjacent(v) {
                let slot = &mut depth[nb.entity.index()];
                if *slot == u32::MAX {
                    *slot = d + 1;
                    nodes.push(nb.entity);
                    queue.push_back(nb.entity);
                }
            }
        }
        nodes.sort_unstable();

        let mut edges = Vec::new();
        if k > 0 {
            for &v in &nodes {
                for &(relation, object) in self.out_edges(v) {
                    if depth[object.index()] != u32::MAX {
                        edges.push(Edge {
                            subject: v,
                            relation,
                            object,
                        });
                    }
                }
            }
        }

        Ok(Subgraph {
            nodes,
            edges,
            seeds,
            order: k,
        })
    }

    /// Writes the graph back out in the tab-separated triple format.
    pub fn write_triples<W: Write>(&self, mut out: W) -> std::io::Result<()> {
        for e in &self.edges {
            writeln!(
                out,
                "{}\t{}\t{}",
                self.entity_name(e.subject),
                self.relation_name(e.relation),
                self.entity_name(e.object)
            )?;
        }
        Ok(())
    }
}

/// Parses tab-separated triple lines. Blank lines and lines starting with `#`
/// are skipped.
pub fn load_triples<R: BufRead>(source: R) -> Result<KnowledgeGraph> {
    let mut triples = Vec::new();
    for (i, line) in source.lines().enumerate() {
        let line_no = i + 1;
        let line = line.map_err(|e| Error::Parse {
            line: line_no,
            message: e.to_string(),
        })?;
        let trimmed = line.trim_end_matches(['\r', '\n']);
        if trimmed.trim().is_empty() || trimmed.trim_start().starts_with('#') {
            continue;
        }
        let fields: Vec<&str> = trimmed.split('\t').collect();
        if fields.len() != 3 {
            return Err(Error::Parse {
                line: line_no,
                message: format!("expected 3 tab-separated fields, found {}", fields.len()),
            });
        }
        let triple =
            Triple::new(fields[0], fields[1], fields[2]).map_err(|message| Error::Parse {
                line: line_no,
                message,
            })?;
        triples.push(triple);
    }
    let graph = KnowledgeGraph::from_triples(triples)?;
    log::info!("loaded knowledge graph: {}", graph.stats());
    Ok(graph)
}

/// A node/edge subset of a [`KnowledgeGraph`], grown from `seeds`.
///
/// `nodes`, `edges` and `seeds` are kept sorted and free of duplicates.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Subgraph {
    nodes: Vec<EntityId>,
    edges: Vec<Edge>,
    seeds: Vec<EntityId>,
    order: usize,
}

impl Subgraph {
    /// Assembles a subgraph, keeping only edges whose endpoints are both in `nodes`.
    pub fn new(
        mut nodes: Vec<EntityId>,
        mut edges: Vec<Edge>,
        mut seeds: Vec<EntityId>,
        order: usize,
    ) -> Self {
        nodes.sort_unstable();
        nodes.dedup();
        edges.sort_unstable();
        edges.dedup();
        edges.retain(|e| {
            nodes.binary_search(&e.subject).is_ok() && nodes.binary_search(&e.object).is_ok()
        });
        seeds.sort_unstable();
        seeds.dedup();
        Self {
            nodes,
            edges,
            seeds,
            order,
        }
    }

    pub fn nodes(&self) -> &[EntityId] {
        &self.nodes
    }

    pub fn edges(&self) -> &[Edge] {
        &self.edges
    }

    pub fn seeds(&self) -> &[EntityId] {
        &self.seeds
    }

    pub fn order(&self) -> usize {
        self.order
    }

    pub fn node_count(&self) -> usize {
        self.nodes.len()
    }

    pub fn edge_count(&self) -> usize {
        self.edges.len()
    }

    pub fn contains_node(&self, v: EntityId) -> bool {
        self.nodes.binary_search(&v).is_ok()
    }

    pub fn contains_edge(&self, e: &Edge) -> bool {
        self.edges.binary_search(e).is_ok()
    }

    /// Position of `v` in [`Subgraph::nodes`].
    pub fn local_index(&self, v: EntityId) -> Option<usize> {
        self.nodes.binary_search(&v).ok()
    }

    /// Node and edge containment in `other`.
    pub fn is_subgraph_of(&self, other: &Subgraph) -> bool {
        self.nodes.iter().all(|&v| other.contains_node(v))
            && self.edges.iter().all(|e| other.contains_edge(e))
    }

    /// Node and edge containment in the full graph.
    pub fn is_within(&self, graph: &KnowledgeGraph) -> bool {
        self.nodes.iter().all(|v| v.index() < graph.entity_count())
            && self.edges.iter().all(|e| graph.contains_edge(e))
    }

    /// Direction-agnostic adjacency over local indices (positions in
    /// [`Subgraph::nodes`]); each list is sorted like [`KnowledgeGraph::adjacent`].
    pub fn local_adjacency(&self) -> Vec<Vec<LocalNeighbor>> {
        let mut adj = vec![Vec::new(); self.nodes.len()];
        for e in &self.edges {
            let s = self.local_index(e.subject).expect("edge endpoint in nodes");
            let o = self.local_index(e.object).expect("edge endpoint in nodes");
            adj[s].push(LocalNeighbor {
                relation: e.relation,
                node: o,
                orientation: Orientation::Forward,
            });
            adj[o].push(LocalNeighbor {
                relation: e.relation,
                node: s,
                orientation: Orientation::Inverse,
            });
        }
        for list in &mut adj {
            list.sort_unstable();
        }
        adj
    }
}

/// Like [`Neighbor`] but addressed by position within a [`Subgraph`].
///
/// Local positions preserve entity-id order, so sorting these matches the
/// name order used by the full graph.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct LocalNeighbor {
    pub relation: RelationId,
    pub node: usize,
    pub orientation: Orientation,
}

#[cfg(test)]
mod tests {
    use super::*;

    fn graph(src: &str) -> KnowledgeGraph {
        load_triples(src.as_bytes()).unwrap()
    }

    fn names(g: &KnowledgeGraph, ids: &[EntityId]) -> Vec<String> {
        ids.iter().map(|&v| g.entity_name(v).to_string()).collect()
    }

    fn edge_names(g: &KnowledgeGraph, sg: &Subgraph) -> Vec<String> {
        sg.edges()
            .iter()
            .map(|e| {
                format!(
                    "{}-{}-{}",
                    g.entity_name(e.subject),
                    g.relation_name(e.relation),
                    g.entity_name(e.object)
                )
            })
            .collect()
    }

    #[test]
    fn loads_two_triples() {
        let g = graph("A\tr1\tB\nB\tr2\tC");
        assert_eq!(
            g.stats(),
            GraphStats {
                entities: 3,
                relations: 2,
                triples: 2
            }
        );
    }

    #[test]
    fn duplicate_lines_are_stored_once() {
        let g = graph("A\tr1\tB\nA\tr1\tB\n");
        assert_eq!(g.stats().triples, 1);
    }

    #[test]
    fn comments_blank_lines_and_whitespace_are_ignored() {
        let g = graph("# header\n\n A \tr1\t B\r\n   \n");
        assert_eq!(g.stats().triples, 1);
        assert!(g.entity_id("A").is_some());
        assert!(g.entity_id(" B ").is_some());
    }

    #[test]
    fn wrong_field_count_reports_line() {
        let err = load_triples("A\tr1\tB\nA\tr1\n".as_bytes()).unwrap_err();
        match err {
            Error::Parse { line, .. } => assert_eq!(line, 2),
            other => panic!("unexpected error {other:?}"),
        }
        assert!(matches!(
            load_triples("A\tr\tB\tC".as_bytes()),
            Err(Error::Parse { line: 1, .. })
        ));
        assert!(matches!(
            load_triples("A\t \tB".as_bytes()),
            Err(Error::Parse { line: 1, .. })
        ));
    }

    #[test]
    fn empty_stream_is_an_error() {
        assert!(matches!(
            load_triples("".as_bytes()),
            Err(Error::EmptyGraph)
        ));
        assert!(matches!(
            load_triples("# only a comment\n".as_bytes()),
            Err(Error::EmptyGraph)
        ));
    }

    #[test]
    fn neighbors_by_direction() {
        let g = graph("A\tr1\tB\nB\tr2\tC");
        let a = g.entity_id("A").unwrap();
        let b = g.entity_id("B").unwrap();
        let c = g.entity_id("C").unwrap();
        let r1 = g.relation_id("r1").unwrap();
        let r2 = g.relation_id("r2").unwrap();

        assert_eq!(
            g.neighbors("A", Direction::Out).unwrap(),
            vec![Neighbor {
                relation: r1,
                entity: b,
                orientation: Orientation::Forward
            }]
        );
        assert_eq!(
            g.neighbors("B", Direction::In).unwrap(),
            vec![Neighbor {
                relation: r1,
                entity: a,
                orientation: Orientation::Inverse
            }]
        );
        assert_eq!(
            g.neighbors("B", Direction::Both).unwrap(),
            vec![
                Neighbor {
                    relation: r1,
                    entity: a,
                    orientation: Orientation::Inverse
                },
                Neighbor {
                    relation: r2,
                    entity: c,
                    orientation: Orientation::Forward
                },
            ]
        );
        assert!(matches!(
            g.neighbors("Z", Direction::Out),
            Err(Error::UnknownEntity(_))
        ));
    }

    #[test]
    fn out_and_in_indexes_are_inverse() {
        let g = graph("A\tr\tB\nB\tr\tA\nA\ts\tC\nC\tr\tC\nD\tt\tA");
        let mut from_out = Vec::new();
        let mut from_in = Vec::new();
        for v in 0..g.entity_count() as u32 {
            let v = EntityId(v);
            for &(r, o) in g.out_edges(v) {
                from_out.push((v, r, o));
            }
            for &(r, s) in g.in_edges(v) {
                from_in.push((s, r, v));
            }
        }
        from_out.sort();
        from_in.sort();
        assert_eq!(from_out, from_in);
        assert_eq!(from_out.len(), g.edges().len());
    }

    #[test]
    fn khop_on_chain() {
        let g = graph("A\tr\tB\nB\tr\tC\nC\tr\tD");
        let a = g.resolve_seeds(&["A"]).unwrap();
        let sg = g.khop_subgraph(&a, 2).unwrap();
        assert_eq!(names(&g, sg.nodes()), ["A", "B", "C"]);
        assert_eq!(edge_names(&g, &sg), ["A-r-B", "B-r-C"]);

        let sg0 = g.khop_subgraph(&a, 0).unwrap();
        assert_eq!(names(&g, sg0.nodes()), ["A"]);
        assert!(sg0.edges().is_empty());
    }

    #[test]
    fn khop_union_of_two_balls() {
        let g = graph("A\tr\tB\nB\tr\tC");
        let seeds = g.resolve_seeds(&["A", "C"]).unwrap();
        let sg = g.khop_subgraph(&seeds, 1).unwrap();
        assert_eq!(names(&g, sg.nodes()), ["A", "B", "C"]);
        assert_eq!(edge_names(&g, &sg), ["A-r-B", "B-r-C"]);
    }

    #[test]
    fn khop_walks_inverse_edges() {
        let g = graph("X\tr\tA\nY\tr\tX");
        let seeds = g.resolve_seeds(&["A"]).unwrap();
        let sg = g.khop_subgraph(&seeds, 2).unwrap();
        assert_eq!(names(&g, sg.nodes()), ["A", "X", "Y"]);
    }

    #[test]
    fn missing_seeds_are_dropped() {
        let g = graph("A\tr\tB");
        assert_eq!(g.resolve_seeds(&["nope", "A"]).unwrap().len(), 1);
        assert!(matches!(g.resolve_seeds(&["nope"]), Err(Error::EmptySeeds)));
    }

    #[test]
    fn dump_round_trip() {
        let g = graph("A\tr1\tB\nB\tr2\tC\nC\tr1\tA\n");
        let mut buf = Vec::new();
        g.write_triples(&mut buf).unwrap();
        let h = load_triples(buf.as_slice()).unwrap();
        assert_eq!(
            g.triples().collect::<Vec<_>>(),
            h.triples().collect::<Vec<_>>()
        );
        assert_eq!(
            g.entities().collect::<Vec<_>>(),
            h.entities().collect::<Vec<_>>()
        );
        assert_eq!(
            g.relations().collect::<Vec<_>>(),
            h.relations().collect::<Vec<_>>()
        );
    }
}
