//! Hashed n-gram query encoder.
//!
//! The vector layout is `[hashed n-grams | statistics]`: the last
//! [`STAT_FEATURES`] slots hold question statistics, everything before them
//! is a signed feature-hashing space for token n-grams. The hashed block is
//! L2-normalized and every statistic lies in `[0, 1]`.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::text;

/// Slots reserved at the end of the vector for question statistics.
pub const STAT_FEATURES: usize = 9;

const INTERROGATIVES: [&str; 6] = ["who", "what", "where", "when", "which", "how"];
const CLAUSE_WORDS: [&str; 8] = [
    "and", "that", "which", "whose", "who", "where", "when", "then",
];

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct EncoderConfig {
    /// Total vector length, statistics included.
    pub dim: usize,
    /// Highest n-gram order hashed (1 = unigrams only).
    pub ngram: usize,
}

impl Default for EncoderConfig {
    fn default() -> Self {
        Self {
            dim: 1 << 16,
            ngram: 2,
        }
    }
}

impl EncoderConfig {
    pub fn validate(&self) -> Result<()> {
        if self.dim <= STAT_FEATURES {
            return Err(Error::Config(format!(
                "encoder dim must exceed {STAT_FEATURES}, got {}",
                self.dim
            )));
        }
        if self.ngram == 0 {
            return Err(Error::Config("encoder ngram order must be positive".into()));
        }
        Ok(())
    }

    fn hash_slots(&self) -> usize {
        self.dim - STAT_FEATURES
    }
}

/// Sparse vector of fixed length `dim`; entries are sorted by index with no
/// duplicates and every value finite.
#[derive(Debug, Clone, PartialEq)]
pub struct FeatureVector {
    dim: usize,
    entries: Vec<(u32, f64)>,
}

impl FeatureVector {
    /// Builds a vector from possibly repeated `(index, value)` pairs, summing duplicates.
    pub fn from_pairs(dim: usize, mut pairs: Vec<(u32, f64)>) -> Self {
        pairs.sort_by_key(|&(i, _)| i);
        let mut entries: Vec<(u32, f64)> = Vec::with_capacity(pairs.len());
        for (i, v) in pairs {
            debug_assert!((i as usize) < dim);
            match entries.last_mut() {
                Some((j, acc)) if *j == i => *acc += v,
                _ => entries.push((i, v)),
            }
        }
        entries.retain(|&(_, v)| v != 0.0);
        Self { dim, entries }
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn entries(&self) -> &[(u32, f64)] {
        &self.entries
    }

    pub fn dot(&self, weights: &[f64]) -> f64 {
        self.entries
            .iter()
            .map(|&(i, v)| weights[i as usize] * v)
            .sum()
    }

    pub fn scaled(&self, factor: f64) -> Self {
        Self {
            dim: self.dim,
            entries: self.entries.iter().map(|&(i, v)| (i, v * factor)).collect(),
        }
    }

    pub fn squared_norm(&self) -> f64 {
        self.entries.iter().map(|&(_, v)| v * v).sum()
    }

    pub fn to_dense(&self) -> Vec<f64> {
        let mut dense = vec![0.0; self.dim];
        for &(i, v) in &self.entries {
            dense[i as usize] = v;
        }
        dense
    }
}

/// Anything that turns a question into a fixed-length feature vector.
///
/// Implement this to plug in an external embedding service; the linear
/// decoder only needs `dim` to stay constant.
pub trait QueryEncoder: Send + Sync {
    fn dim(&self) -> usize;
    fn encode(&self, question: &str) -> Result<FeatureVector>;
}

#[derive(Debug, Clone, Copy, Default)]
pub struct HashingEncoder {
    pub config: EncoderConfig,
}

impl HashingEncoder {
    pub fn new(config: EncoderConfig) -> Result<Self> {
        config.validate()?;
        Ok(Self { config })
    }
}

impl QueryEncoder for HashingEncoder {
    fn dim(&self) -> usize {
        self.config.dim
    }

    fn encode(&self, question: &str) -> Result<FeatureVector> {
        featurize(question, &self.config)
    }
}

fn fnv1a(bytes: &[u8]) -> u64 {
    let mut hash: u64 = 0xcbf2_9ce4_8422_2325;
    for &b in bytes {
        hash ^= u64::from(b);
        hash = hash.wrapping_mul(0x0100_0000_01b3);
    }
    hash
}

/// Question statistics, each mapped into `[0, 1]`.
fn statistics(question: &str, tokens: &[String]) -> [f64; STAT_FEATURES] {
    let token_count = tokens.len() as f64;

    // Capitalized words after the first, plus quoted spans, approximate
    // entity mentions.
    let words: Vec<&str> = question.split_whitespace().collect();
    let capitalized = words
        .iter()
        .skip(1)
        .filter(|w| w.chars().next().is_some_and(char::is_uppercase))
        .count();
    let quoted = question.matches('"').count() / 2;
    let entities = (capitalized + quoted) as f64;

    let commas = question.matches(',').count();
    let connectives = tokens
        .iter()
        .skip(1)
        .filter(|t| CLAUSE_WORDS.contains(&t.as_str()))
        .count();
    let clauses = (commas + connectives) as f64;

    let mut stats = [0.0; STAT_FEATURES];
    stats[0] = (token_count / 32.0).min(1.0);
    stats[1] = (entities / 8.0).min(1.0);
    stats[2] = (clauses / 8.0).min(1.0);
    for (slot, word) in INTERROGATIVES.iter().enumerate() {
        if tokens.iter().any(|t| t == word) {
            stats[3 + slot] = 1.0;
        }
    }
    stats
}

/// Deterministic encoding of a question. Surrounding whitespace and case are
/// ignored by the n-gram block.
pub fn featurize(question: &str, config: &EncoderConfig) -> Result<FeatureVector> {
    config.validate()?;
    let question = question.trim();
    if question.is_empty() {
        return Err(Error::EmptyText);
    }
    let tokens = text::tokens(question);
    let slots = config.hash_slots() as u64;

    let mut pairs: Vec<(u32, f64)> = Vec::new();
    for order in 1..=config.ngram {
        for gram in tokens.windows(order) {
            let key = gram.join(" ");
            let h = fnv1a(key.as_bytes());
            let sign = if (h >> 63) == 0 { 1.0 } else { -1.0 };
            pairs.push(((h % slots) as u32, sign));
        }
    }
    let hashed = FeatureVector::from_pairs(config.dim, pairs);
    let norm = hashed.squared_norm().sqrt();
    let mut entries: Vec<(u32, f64)> = if norm > 0.0 {
        hashed.entries.iter().map(|&(i, v)| (i, v / norm)).collect()
    } else {
        Vec::new()
    };

    let base = config.hash_slots() as u32;
    for (offset, value) in statistics(question, &tokens).into_iter().enumerate() {
        if value != 0.0 {
            entries.push((base + offset as u32, value));
        }
    }
    Ok(FeatureVector::from_pairs(config.dim, entries))
}
