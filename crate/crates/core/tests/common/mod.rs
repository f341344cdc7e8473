//! Random graph corpora and brute-force reference implementations shared by
//! the integration tests. Nothing here calls into the traversal code under
//! test; the oracles work directly on triples.

#![allow(dead_code)]

use std::collections::{BTreeSet, VecDeque};

use hopwise::kg::{Orientation, Triple};
use hopwise::retrieval::ReasoningPath;
use hopwise::KnowledgeGraph;
use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Directed graph on `n0..n{nodes-1}` with each ordered pair linked with
/// probability `p` under one of `relations` labels. Never empty.
pub fn random_triples(rng: &mut ChaCha8Rng, nodes: usize, p: f64, relations: usize) -> Vec<Triple> {
    let mut out = Vec::new();
    for i in 0..nodes {
        for j in 0..nodes {
            if i != j && rng.random_bool(p) {
                let r = rng.random_range(0..relations);
                out.push(
                    Triple::new(&format!("n{i}"), &format!("r{r}"), &format!("n{j}")).unwrap(),
                );
            }
        }
    }
    if out.is_empty() {
        out.push(Triple::new("n0", "r0", "n1").unwrap());
    }
    out
}

/// Step of a path as plain names: (relation, forward?, entity).
pub type NamedStep = (String, bool, String);
/// A path as plain names: start entity plus steps.
pub type NamedPath = (String, Vec<NamedStep>);

/// Undirected adjacency by entity name, with parallel edges kept.
pub struct NameGraph {
    pub names: Vec<String>,
    pub adj: Vec<Vec<(String, bool, usize)>>,
}

impl NameGraph {
    pub fn new(triples: &[Triple]) -> Self {
        let names: Vec<String> = triples
            .iter()
            .flat_map(|t| [t.subject.clone(), t.object.clone()])
            .collect::<BTreeSet<_>>()
            .into_iter()
            .collect();
        let idx = |s: &str| names.binary_search_by(|n| n.as_str().cmp(s)).unwrap();
        let mut adj = vec![Vec::new(); names.len()];
        let unique: BTreeSet<&Triple> = triples.iter().collect();
        for t in unique {
            let (s, o) = (idx(&t.subject), idx(&t.object));
            adj[s].push((t.relation.clone(), true, o));
            adj[o].push((t.relation.clone(), false, s));
        }
        Self { names, adj }
    }

    pub fn index(&self, name: &str) -> Option<usize> {
        self.names.iter().position(|n| n == name)
    }

    /// Every simple path of 1..=max_hops steps from `start`, by recursion.
    pub fn dfs_paths(&self, start: usize, max_hops: usize) -> BTreeSet<NamedPath> {
        fn go(
            g: &NameGraph,
            at: usize,
            max_hops: usize,
            visited: &mut Vec<usize>,
            steps: &mut Vec<NamedStep>,
            out: &mut BTreeSet<NamedPath>,
        ) {
            if steps.len() == max_hops {
                return;
            }
            for (rel, fwd, next) in &g.adj[at] {
                if visited.contains(next) {
                    continue;
                }
                visited.push(*next);
                steps.push((rel.clone(), *fwd, g.names[*next].clone()));
                out.insert((g.names[visited[0]].clone(), steps.clone()));
                go(g, *next, max_hops, visited, steps, out);
                steps.pop();
                visited.pop();
            }
        }
        let mut out = BTreeSet::new();
        go(
            self,
            start,
            max_hops,
            &mut vec![start],
            &mut Vec::new(),
            &mut out,
        );
        out
    }

    /// Unweighted hop distances from `start`.
    pub fn distances(&self, start: usize) -> Vec<Option<usize>> {
        let mut dist = vec![None; self.names.len()];
        dist[start] = Some(0);
        let mut q = VecDeque::from([start]);
        while let Some(v) = q.pop_front() {
            let d = dist[v].unwrap();
            for (_, _, u) in &self.adj[v] {
                if dist[*u].is_none() {
                    dist[*u] = Some(d + 1);
                    q.push_back(*u);
                }
            }
        }
        dist
    }

    /// All-pairs distances by Floyd-Warshall.
    pub fn all_pairs(&self) -> Vec<Vec<Option<usize>>> {
        let n = self.names.len();
        let mut d = vec![vec![None; n]; n];
        for (v, row) in d.iter_mut().enumerate() {
            row[v] = Some(0);
            for (_, _, u) in &self.adj[v] {
                if *u != v {
                    row[*u] = Some(1);
                }
            }
        }
        for k in 0..n {
            for i in 0..n {
                for j in 0..n {
                    if let (Some(a), Some(b)) = (d[i][k], d[k][j]) {
                        if d[i][j].is_none_or(|c| a + b < c) {
                            d[i][j] = Some(a + b);
                        }
                    }
                }
            }
        }
        d
    }

    /// Whether `path` walks real edges in the stated orientation.
    pub fn is_walk(&self, path: &NamedPath) -> bool {
        let Some(mut at) = self.index(&path.0) else {
            return false;
        };
        for (rel, fwd, name) in &path.1 {
            let Some(next) = self.index(name) else {
                return false;
            };
            if !self.adj[at]
                .iter()
                .any(|(r, f, u)| r == rel && f == fwd && *u == next)
            {
                return false;
            }
            at = next;
        }
        true
    }
}

pub fn named(graph: &KnowledgeGraph, path: &ReasoningPath) -> NamedPath {
    (
        graph.entity_name(path.start).to_string(),
        path.hops
            .iter()
            .map(|h| {
                (
                    graph.relation_name(h.relation).to_string(),
                    h.orientation == Orientation::Forward,
                    graph.entity_name(h.entity).to_string(),
                )
            })
            .collect(),
    )
}

/// Personalized PageRank by a dense linear solve of
/// `π = (1-α)·s + α·Pᵀπ + α·(dᵀπ)·s`, where `P` is the row-normalized
/// undirected adjacency (multi-edges counted), `d` marks isolated nodes and
/// `s` is uniform over `seeds`.
pub fn dense_ppr(n: usize, edges: &[(usize, usize)], seeds: &[usize], alpha: f64) -> Vec<f64> {
    let mut a = DMatrix::<f64>::zeros(n, n);
    for &(u, v) in edges {
        a[(u, v)] += 1.0;
        a[(v, u)] += 1.0;
    }
    let mut s = DVector::<f64>::zeros(n);
    for &x in seeds {
        s[x] = 1.0 / seeds.len() as f64;
    }
    let mut m = DMatrix::<f64>::identity(n, n);
    for u in 0..n {
        let deg: f64 = a.row(u).sum();
        if deg == 0.0 {
            for v in 0..n {
                m[(v, u)] -= alpha * s[v];
            }
        } else {
            for v in 0..n {
                m[(v, u)] -= alpha * a[(u, v)] / deg;
            }
        }
    }
    let rhs = s * (1.0 - alpha);
    m.lu()
        .solve(&rhs)
        .expect("PPR system is non-singular")
        .iter()
        .copied()
        .collect()
}

/// A request captured by [`serve`].
#[derive(Debug, Clone)]
pub struct Captured {
    pub head: String,
    pub body: String,
}

/// Serves one canned HTTP response per entry of `replies` on a local port
/// and hands back what each request contained.
pub fn serve(replies: Vec<(u16, String)>) -> (String, std::thread::JoinHandle<Vec<Captured>>) {
    use std::io::{BufRead, BufReader, Read, Write};
    let listener = std::net::TcpListener::bind("127.0.0.1:0").unwrap();
    let url = format!("http://{}/", listener.local_addr().unwrap());
    let handle = std::thread::spawn(move || {
        let mut seen = Vec::new();
        for (status, body) in replies {
            let (stream, _) = listener.accept().unwrap();
            let mut reader = BufReader::new(stream);
            let mut head = String::new();
            loop {
                let mut line = String::new();
                reader.read_line(&mut line).unwrap();
                if line == "\r\n" || line.is_empty() {
                    break;
                }
                head.push_str(&line);
            }
            let lower = head.to_ascii_lowercase();
            let mut request_body = Vec::new();
            if let Some(len) = lower
                .lines()
                .find_map(|l| l.strip_prefix("content-length:"))
                .map(|v| v.trim().parse::<usize>().unwrap())
            {
                request_body.resize(len, 0);
                reader.read_exact(&mut request_body).unwrap();
            } else if lower.contains("transfer-encoding: chunked") {
                loop {
                    let mut size = String::new();
                    reader.read_line(&mut size).unwrap();
                    let n = usize::from_str_radix(size.trim(), 16).unwrap();
                    let mut chunk = vec![0; n + 2];
                    reader.read_exact(&mut chunk).unwrap();
                    if n == 0 {
                        break;
                    }
                    request_body.extend_from_slice(&chunk[..n]);
                }
            }
            let reply = format!(
                "HTTP/1.1 {status} X\r\nContent-Type: application/json\r\nContent-Length: {}\r\nConnection: close\r\n\r\n{body}",
                body.len()
            );
            let mut stream = reader.into_inner();
            stream.write_all(reply.as_bytes()).unwrap();
            stream.flush().unwrap();
            seen.push(Captured {
                head,
                body: String::from_utf8(request_body).unwrap(),
            });
        }
        seen
    });
    (url, handle)
}
