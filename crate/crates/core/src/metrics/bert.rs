//! Embedding-based greedy-matching similarity (BERTScore-style, no IDF).

use std::collections::HashMap;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::tokenize::TokenSequence;
use crate::error::{Error, Result};
use crate::router::hash_bucket;

/// Maps tokens to vectors of a common dimension, one vector per input token.
pub trait TokenEmbedder: Sync {
    fn embed(&self, tokens: &[String]) -> Result<Vec<Vec<f64>>>;
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EmbeddingKind {
    Remote,
    DeterministicTest,
}

/// Configuration of the embedding backend used for the BERT-style columns.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EmbeddingProvider {
    pub kind: EmbeddingKind,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub endpoint: Option<String>,
    pub dimension: usize,
}

impl EmbeddingProvider {
    pub fn validate(&self) -> Result<()> {
        if self.dimension == 0 {
            return Err(Error::invalid("embedding dimension must be positive"));
        }
        if self.kind == EmbeddingKind::Remote && self.endpoint.as_deref().is_none_or(str::is_empty) {
            return Err(Error::invalid("remote embedding provider requires an endpoint"));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum HashEmbedding {
    /// Seeded pseudo-random unit vectors.
    Dense,
    /// Standard basis vector `e_{hash(token) mod dimension}`; distinct
    /// buckets are exactly orthogonal.
    OneHot,
}

/// Test provider: vectors derived from a hash of the token and a seed.
#[derive(Debug, Clone)]
pub struct DeterministicEmbedder {
    pub dimension: usize,
    pub seed: u64,
    pub mode: HashEmbedding,
}

impl DeterministicEmbedder {
    pub fn dense(dimension: usize, seed: u64) -> Self {
        DeterministicEmbedder {
            dimension,
            seed,
            mode: HashEmbedding::Dense,
        }
    }

    pub fn one_hot(dimension: usize) -> Self {
        DeterministicEmbedder {
            dimension,
            seed: 0,
            mode: HashEmbedding::OneHot,
        }
    }

    pub fn vector(&self, token: &str) -> Vec<f64> {
        let mut v = vec![0.0; self.dimension];
        match self.mode {
            HashEmbedding::OneHot => v[hash_bucket(token, self.dimension)] = 1.0,
            HashEmbedding::Dense => {
                let key = hash_bucket(token, usize::MAX) as u64;
                let mut rng = ChaCha8Rng::seed_from_u64(key ^ self.seed.rotate_left(17));
                for x in v.iter_mut() {
                    *x = rng.random_range(-1.0..1.0);
                }
                let norm = v.iter().map(|x| x * x).sum::<f64>().sqrt();
                if norm > 0.0 {
                    v.iter_mut().for_each(|x| *x /= norm);
                }
            }
        }
        v
    }
}

impl TokenEmbedder for DeterministicEmbedder {
    fn embed(&self, tokens: &[String]) -> Result<Vec<Vec<f64>>> {
        if self.dimension == 0 {
            return Err(Error::MetricUnavailable("embedding dimension is zero".into()));
        }
        Ok(tokens.iter().map(|t| self.vector(t)).collect())
    }
}

/// Precomputed token vectors, e.g. fetched in one batch from a remote
/// provider before a corpus run.
#[derive(Debug, Clone, Default)]
pub struct EmbeddingTable {
    vectors: HashMap<String, Vec<f64>>,
}

impl EmbeddingTable {
    pub fn new(vectors: HashMap<String, Vec<f64>>) -> Result<Self> {
        let mut dims = vectors.values().map(Vec::len);
        if let Some(first) = dims.next() {
            if dims.any(|d| d != first) {
                return Err(Error::Protocol("embedding vectors differ in dimension".into()));
            }
        }
        Ok(EmbeddingTable { vectors })
    }

    pub fn len(&self) -> usize {
        self.vectors.len()
    }

    pub fn is_empty(&self) -> bool {
        self.vectors.is_empty()
    }
}

impl TokenEmbedder for EmbeddingTable {
    fn embed(&self, tokens: &[String]) -> Result<Vec<Vec<f64>>> {
        tokens
            .iter()
            .map(|t| {
                self.vectors
                    .get(t)
                    .cloned()
                    .ok_or_else(|| Error::MetricUnavailable(format!("no embedding for token `{t}`")))
            })
            .collect()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BertStyleScore {
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
}

fn cosine(a: &[f64], b: &[f64]) -> f64 {
    let dot: f64 = a.iter().zip(b).map(|(x, y)| x * y).sum();
    let na = a.iter().map(|x| x * x).sum::<f64>().sqrt();
    let nb = b.iter().map(|x| x * x).sum::<f64>().sqrt();
    if na == 0.0 || nb == 0.0 {
        0.0
    } else {
        dot / (na * nb)
    }
}

fn greedy_mean(from: &[Vec<f64>], to: &[Vec<f64>]) -> f64 {
    let total: f64 = from
        .iter()
        .map(|u| to.iter().map(|v| cosine(u, v)).fold(f64::NEG_INFINITY, f64::max))
        .sum();
    (total / from.len() as f64).clamp(0.0, 1.0)
}

/// Greedy matching: precision is the mean over candidate tokens of the best
/// cosine to any reference token, recall the symmetric quantity. Empty input
/// on either side scores 0.
pub fn bert_style_score(
    candidate: &TokenSequence,
    reference: &TokenSequence,
    embedder: &dyn TokenEmbedder,
) -> Result<BertStyleScore> {
    if candidate.is_empty() || reference.is_empty() {
        return Ok(BertStyleScore {
            precision: 0.0,
            recall: 0.0,
            f1: 0.0,
        });
    }
    let cand = embedder.embed(&candidate.tokens)?;
    let refs = embedder.embed(&reference.tokens)?;
    if cand.len() != candidate.len() || refs.len() != reference.len() {
        return Err(Error::MetricUnavailable("embedder returned wrong vector count".into()));
    }
    let dim = cand[0].len();
    if cand.iter().chain(&refs).any(|v| v.len() != dim) {
        return Err(Error::MetricUnavailable("embedding dimensions differ".into()));
    }
    let precision = greedy_mean(&cand, &refs);
    let recall = greedy_mean(&refs, &cand);
    let f1 = if precision + recall == 0.0 {
        0.0
    } else {
        2.0 * precision * recall / (precision + recall)
    };
    Ok(BertStyleScore {
        precision,
        recall,
        f1,
    })
}
