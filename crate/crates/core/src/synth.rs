//! Seeded generators for typed knowledge graphs and multi-hop question sets,
//! used by tests, benchmarks and the `synth` CLI command.

use std::collections::BTreeSet;

use rand::seq::{IndexedRandom, SliceRandom};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::classifier::{compute_min_hop, label_query, Complexity, ComplexityLabel};
use crate::dataset::DatasetRecord;
use crate::error::Result;
use crate::kg::{EntityId, KnowledgeGraph, Triple};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Kind {
    Film,
    Person,
    Company,
    City,
    Country,
    University,
    Award,
    Genre,
}

const KINDS: [(Kind, f64); 8] = [
    (Kind::Film, 0.25),
    (Kind::Person, 0.40),
    (Kind::Company, 0.10),
    (Kind::City, 0.15),
    (Kind::Country, 0.01),
    (Kind::University, 0.04),
    (Kind::Award, 0.02),
    (Kind::Genre, 0.03),
];

struct RelationSpec {
    name: &'static str,
    from: Kind,
    to: Kind,
    noun: &'static str,
    /// Chance that an entity of kind `from` has this edge.
    p: f64,
}

const RELATIONS: &[RelationSpec] = &[
    RelationSpec {
        name: "film.director",
        from: Kind::Film,
        to: Kind::Person,
        noun: "director",
        p: 1.0,
    },
    RelationSpec {
        name: "film.genre",
        from: Kind::Film,
        to: Kind::Genre,
        noun: "genre",
        p: 1.0,
    },
    RelationSpec {
        name: "film.studio",
        from: Kind::Film,
        to: Kind::Company,
        noun: "studio",
        p: 0.8,
    },
    RelationSpec {
        name: "film.setting",
        from: Kind::Film,
        to: Kind::City,
        noun: "setting",
        p: 0.5,
    },
    RelationSpec {
        name: "person.birthplace",
        from: Kind::Person,
        to: Kind::City,
        noun: "birthplace",
        p: 1.0,
    },
    RelationSpec {
        name: "person.employer",
        from: Kind::Person,
        to: Kind::Company,
        noun: "employer",
        p: 0.7,
    },
    RelationSpec {
        name: "person.alma_mater",
        from: Kind::Person,
        to: Kind::University,
        noun: "alma mater",
        p: 0.6,
    },
    RelationSpec {
        name: "person.award",
        from: Kind::Person,
        to: Kind::Award,
        noun: "award",
        p: 0.3,
    },
    RelationSpec {
        name: "person.spouse",
        from: Kind::Person,
        to: Kind::Person,
        noun: "spouse",
        p: 0.3,
    },
    RelationSpec {
        name: "company.headquarters",
        from: Kind::Company,
        to: Kind::City,
        noun: "headquarters",
        p: 1.0,
    },
    RelationSpec {
        name: "company.founder",
        from: Kind::Company,
        to: Kind::Person,
        noun: "founder",
        p: 0.8,
    },
    RelationSpec {
        name: "city.country",
        from: Kind::City,
        to: Kind::Country,
        noun: "country",
        p: 1.0,
    },
    RelationSpec {
        name: "country.capital",
        from: Kind::Country,
        to: Kind::City,
        noun: "capital",
        p: 1.0,
    },
    RelationSpec {
        name: "university.location",
        from: Kind::University,
        to: Kind::City,
        noun: "location",
        p: 1.0,
    },
    RelationSpec {
        name: "award.sponsor",
        from: Kind::Award,
        to: Kind::Company,
        noun: "sponsor",
        p: 1.0,
    },
    RelationSpec {
        name: "genre.origin",
        from: Kind::Genre,
        to: Kind::Country,
        noun: "origin country",
        p: 1.0,
    },
];

const SYLLABLES: [&str; 32] = [
    "ka", "lo", "mi", "ren", "dar", "vel", "to", "sa", "bri", "quon", "ze", "pha", "nor", "il",
    "gu", "cas", "ti", "mor", "el", "ban", "vi", "os", "tre", "lum", "da", "fen", "ro", "ys",
    "hal", "chi", "ne", "wex",
];

const NAME_SPACE: u32 = 1 << 20;

fn capitalize(s: &str) -> String {
    let mut c = s.chars();
    c.next()
        .map(|f| f.to_uppercase().chain(c).collect())
        .unwrap_or_default()
}

/// Unique, pronounceable name for entity number `index`.
fn entity_name(index: u32, kind: Kind) -> String {
    assert!(
        index < NAME_SPACE,
        "synthetic graphs are limited to 2^20 entities"
    );
    // odd multiplier: a bijection on the name space that scatters neighbors
    let code = index.wrapping_mul(0x9E37_79B1) & (NAME_SPACE - 1);
    let syl: Vec<&str> = (0..4)
        .map(|i| SYLLABLES[((code >> (5 * i)) & 31) as usize])
        .collect();
    match kind {
        Kind::Person => format!(
            "{} {}",
            capitalize(&syl[..2].concat()),
            capitalize(&syl[2..].concat())
        ),
        Kind::Company => format!("{} Group", capitalize(&syl.concat())),
        Kind::University => format!("University of {}", capitalize(&syl.concat())),
        _ => capitalize(&syl.concat()),
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct GraphSpec {
    /// Approximate number of triples to generate.
    pub triples: usize,
    pub seed: u64,
}

/// Generates a typed graph of roughly `spec.triples` facts.
pub fn generate_triples(spec: GraphSpec) -> Vec<Triple> {
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let out_degree =
        |k: Kind| -> f64 { RELATIONS.iter().filter(|r| r.from == k).map(|r| r.p).sum() };
    let per_entity: f64 = KINDS.iter().map(|&(k, share)| share * out_degree(k)).sum();
    let total = (spec.triples as f64 / per_entity).max(8.0);

    let mut names: Vec<(Kind, Vec<String>)> = Vec::new();
    let mut next = 0u32;
    for &(kind, share) in &KINDS {
        let count = ((share * total).round() as usize).max(2);
        let list = (0..count)
            .map(|_| {
                next += 1;
                entity_name(next, kind)
            })
            .collect();
        names.push((kind, list));
    }
    let of = |k: Kind| {
        &names
            .iter()
            .find(|(n, _)| *n == k)
            .expect("every kind has entities")
            .1
    };

    let mut triples = Vec::new();
    for rel in RELATIONS {
        let targets = of(rel.to);
        for (i, subject) in of(rel.from).iter().enumerate() {
            if !rng.random_bool(rel.p) {
                continue;
            }
            let mut j = rng.random_range(0..targets.len());
            if rel.from == rel.to && j == i {
                j = (j + 1) % targets.len();
            }
            triples.push(Triple::new(subject, rel.name, &targets[j]).expect("names are non-empty"));
        }
    }
    triples
}

pub fn generate_graph(spec: GraphSpec) -> Result<KnowledgeGraph> {
    KnowledgeGraph::from_triples(generate_triples(spec))
}

fn noun(relation: &str) -> &'static str {
    RELATIONS
        .iter()
        .find(|r| r.name == relation)
        .map(|r| r.noun)
        .unwrap_or("related entity")
}

const OPENERS: [(&str, &str); 4] = [
    ("What is the ", "?"),
    ("Which entity is the ", "?"),
    ("Name the ", "."),
    ("Can you tell me the ", "?"),
];

/// Question text asking for the end of `nouns` applied in order to `seed`.
fn phrase(rng: &mut ChaCha8Rng, nouns: &[&str], seed: &str) -> String {
    let chain: Vec<&str> = nouns.iter().rev().copied().collect();
    let (open, close) = OPENERS[rng.random_range(0..OPENERS.len())];
    format!("{open}{} of {seed}{close}", chain.join(" of the "))
}

/// A generated question with its true minimum hop count.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SyntheticQuestion {
    pub record: DatasetRecord,
    /// Length of the relation chain the question was phrased from.
    pub chain: usize,
    pub min_hop: usize,
}

impl SyntheticQuestion {
    pub fn label(&self, delta: usize) -> ComplexityLabel {
        label_query(self.min_hop, delta)
    }
}

/// Follows the relation chain forward from `seed`; returns all endpoints.
fn chain_targets(
    graph: &KnowledgeGraph,
    seed: EntityId,
    relations: &[crate::kg::RelationId],
) -> Vec<EntityId> {
    let mut frontier: BTreeSet<EntityId> = BTreeSet::from([seed]);
    for &r in relations {
        frontier = frontier
            .iter()
            .flat_map(|&v| {
                graph
                    .out_edges(v)
                    .iter()
                    .filter(move |(rel, _)| *rel == r)
                    .map(|&(_, o)| o)
            })
            .collect();
    }
    frontier.remove(&seed);
    frontier.into_iter().collect()
}

/// Samples questions by random forward walks and buckets them by their
/// minimum hop count (1 to `per_hop.len()`), until each bucket holds its
/// quota or the attempt budget runs out. Ids are `{prefix}{n}` in output
/// order; buckets appear interleaved.
pub fn generate_questions(
    graph: &KnowledgeGraph,
    per_hop: &[usize],
    seed: u64,
    prefix: &str,
) -> Vec<SyntheticQuestion> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let max_hop = per_hop.len();
    let mut buckets: Vec<Vec<SyntheticQuestion>> = vec![Vec::new(); max_hop];
    let mut seen = BTreeSet::new();
    let wanted: usize = per_hop.iter().sum();
    let attempts = 200 * wanted.max(1);

    for attempt in 0..attempts {
        if buckets.iter().zip(per_hop).all(|(b, &q)| b.len() >= q) {
            break;
        }
        // aim at the emptiest bucket, but walks may land shorter
        let target = (0..max_hop)
            .filter(|&h| buckets[h].len() < per_hop[h])
            .max_by_key(|&h| (per_hop[h] - buckets[h].len(), h))
            .expect("an unfilled bucket exists")
            + 1;
        let length = target + usize::from(attempt % 3 == 0 && target < max_hop);

        let start = EntityId(rng.random_range(0..graph.entity_count() as u32));
        let mut on_path = vec![start];
        let mut relations = Vec::new();
        let mut at = start;
        for _ in 0..length {
            let options: Vec<_> = graph
                .out_edges(at)
                .iter()
                .filter(|(_, o)| !on_path.contains(o))
                .collect();
            let Some(&&(r, o)) = options.choose(&mut rng) else {
                break;
            };
            relations.push(r);
            on_path.push(o);
            at = o;
        }
        if relations.len() != length {
            continue;
        }
        let answers = chain_targets(graph, start, &relations);
        if answers.is_empty() {
            continue;
        }
        let seed_name = graph.entity_name(start).to_string();
        let answer_names: Vec<String> = answers
            .iter()
            .map(|&a| graph.entity_name(a).to_string())
            .collect();
        let Ok(Some(min_hop)) = compute_min_hop(graph, &[&seed_name], &answer_names) else {
            continue;
        };
        if min_hop == 0 || min_hop > max_hop || buckets[min_hop - 1].len() >= per_hop[min_hop - 1] {
            continue;
        }
        let nouns: Vec<&str> = relations
            .iter()
            .map(|&r| noun(graph.relation_name(r)))
            .collect();
        let question = phrase(&mut rng, &nouns, &seed_name);
        if !seen.insert(question.clone()) {
            continue;
        }
        buckets[min_hop - 1].push(SyntheticQuestion {
            record: DatasetRecord {
                id: String::new(),
                question,
                question_entities: vec![seed_name],
                answers: answer_names,
            },
            chain: length,
            min_hop,
        });
    }

    let longest = buckets.iter().map(Vec::len).max().unwrap_or(0);
    let mut out = Vec::with_capacity(wanted);
    for i in 0..longest {
        for b in &buckets {
            if let Some(q) = b.get(i) {
                out.push(q.clone());
            }
        }
    }
    for (n, q) in out.iter_mut().enumerate() {
        q.record.id = format!("{prefix}{n:05}");
    }
    out
}

/// Text-only questions whose depth (1 to 4 relations) is spelled out by
/// the phrasing, labeled `Simple` iff the depth is at most `delta`.
pub fn phrasing_corpus(n: usize, delta: usize, seed: u64) -> Vec<(String, Complexity)> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let nouns: Vec<&str> = RELATIONS.iter().map(|r| r.noun).collect();
    let mut out = Vec::with_capacity(n);
    for i in 0..n {
        let depth = i % 4 + 1;
        let chain: Vec<&str> = (0..depth)
            .map(|_| *nouns.choose(&mut rng).expect("nouns"))
            .collect();
        let kind = KINDS[rng.random_range(0..KINDS.len())].0;
        let seed_name = entity_name(rng.random_range(1..NAME_SPACE), kind);
        out.push((
            phrase(&mut rng, &chain, &seed_name),
            label_query(depth, delta).value,
        ));
    }
    out.shuffle(&mut rng);
    out
}
