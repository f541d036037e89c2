//! Built-in scorer: one-vs-rest logistic regression over hashed lowercase
//! word-unigram counts.

use std::collections::BTreeMap;
use std::fs;
use std::path::Path;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::LabelScorer;
use crate::error::{Error, Result};
use crate::label::{default_label_registry, label_ids, LabelScore, SpecialtyLabel, LABEL_COUNT};
use crate::metrics::tokenize;
use crate::types::QAExample;

pub const DEFAULT_BUCKETS: usize = 1 << 16;

const LEARNING_RATE: f64 = 0.1;

/// FNV-1a over the token bytes, reduced modulo `buckets`.
pub fn hash_bucket(token: &str, buckets: usize) -> usize {
    let mut hash: u64 = 0xcbf2_9ce4_8422_2325;
    for byte in token.as_bytes() {
        hash ^= u64::from(*byte);
        hash = hash.wrapping_mul(0x0000_0100_0000_01b3);
    }
    (hash % buckets as u64) as usize
}

/// Sparse `(bucket, count)` features, bucket-ascending.
fn featurize(text: &str, buckets: usize) -> Vec<(usize, f64)> {
    let mut counts: BTreeMap<usize, f64> = BTreeMap::new();
    for token in tokenize(text).tokens {
        *counts.entry(hash_bucket(&token, buckets)).or_default() += 1.0;
    }
    counts.into_iter().collect()
}

fn sigmoid(z: f64) -> f64 {
    if z >= 0.0 {
        1.0 / (1.0 + (-z).exp())
    } else {
        let e = z.exp();
        e / (1.0 + e)
    }
}

/// Trained weights. `weights[k]` and `bias[k]` belong to `label_order[k]`;
/// each label's parameter vector has `buckets + 1` entries counting the bias.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LinearScorerModel {
    pub buckets: usize,
    pub label_order: Vec<String>,
    pub weights: Vec<Vec<f64>>,
    pub bias: Vec<f64>,
}

impl LinearScorerModel {
    pub fn zeros(buckets: usize) -> Result<Self> {
        if buckets == 0 {
            return Err(Error::invalid("bucket count must be positive"));
        }
        Ok(LinearScorerModel {
            buckets,
            label_order: label_ids().map(str::to_string).collect(),
            weights: vec![vec![0.0; buckets]; LABEL_COUNT],
            bias: vec![0.0; LABEL_COUNT],
        })
    }

    pub fn validate(&self) -> Result<()> {
        if self.buckets == 0 {
            return Err(Error::invalid("bucket count must be positive"));
        }
        let mut order = self.label_order.clone();
        order.sort();
        if !order.iter().map(String::as_str).eq(label_ids()) {
            return Err(Error::invalid(
                "label_order must list each registry label exactly once",
            ));
        }
        if self.weights.len() != LABEL_COUNT || self.bias.len() != LABEL_COUNT {
            return Err(Error::invalid("expected one weight vector and bias per label"));
        }
        if self.weights.iter().any(|w| w.len() != self.buckets) {
            return Err(Error::invalid("weight vector dimension differs from bucket count"));
        }
        if self.weights.iter().flatten().chain(&self.bias).any(|w| !w.is_finite()) {
            return Err(Error::invalid("model contains non-finite weights"));
        }
        Ok(())
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let model: LinearScorerModel = serde_json::from_slice(&fs::read(path.as_ref())?)?;
        model.validate()?;
        Ok(model)
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        fs::write(path.as_ref(), serde_json::to_vec(self)?)?;
        Ok(())
    }

    fn logit(&self, row: usize, features: &[(usize, f64)]) -> f64 {
        let weights = &self.weights[row];
        features
            .iter()
            .fold(self.bias[row], |acc, &(bucket, count)| acc + weights[bucket] * count)
    }
}

impl LabelScorer for LinearScorerModel {
    fn score_labels(&self, query: &str) -> Result<Vec<LabelScore>> {
        if query.trim().is_empty() {
            return Err(Error::invalid("query is empty"));
        }
        let features = featurize(query, self.buckets);
        default_label_registry()
            .into_iter()
            .map(|label| {
                let row = self
                    .label_order
                    .iter()
                    .position(|id| *id == label.id)
                    .ok_or_else(|| Error::UnknownLabel(label.id.clone()))?;
                let score = sigmoid(self.logit(row, &features));
                Ok(LabelScore { label, score })
            })
            .collect()
    }
}

/// Trains the built-in scorer with plain SGD on the logistic loss, one
/// independent sigmoid per label. Example order is reshuffled each epoch from
/// `seed`, so identical inputs give bit-identical weights.
pub fn train_builtin_scorer(
    corpus: &[QAExample],
    buckets: usize,
    epochs: usize,
    seed: u64,
) -> Result<LinearScorerModel> {
    if corpus.is_empty() {
        return Err(Error::invalid("training corpus is empty"));
    }
    if epochs == 0 {
        return Err(Error::invalid("epochs must be positive"));
    }
    let mut model = LinearScorerModel::zeros(buckets)?;
    let labels: Vec<SpecialtyLabel> = default_label_registry();

    let mut rows = Vec::with_capacity(corpus.len());
    for example in corpus {
        let mut targets = [0.0; LABEL_COUNT];
        for gold in &example.gold_labels {
            let idx = gold
                .index()
                .ok_or_else(|| Error::UnknownLabel(gold.id.clone()))?;
            targets[idx] = 1.0;
        }
        rows.push((featurize(&example.question, buckets), targets));
    }

    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut order: Vec<usize> = (0..rows.len()).collect();
    for _ in 0..epochs {
        order.shuffle(&mut rng);
        for &i in &order {
            let (features, targets) = &rows[i];
            for (k, _) in labels.iter().enumerate() {
                let gradient = sigmoid(model.logit(k, features)) - targets[k];
                let step = LEARNING_RATE * gradient;
                for &(bucket, count) in features {
                    model.weights[k][bucket] -= step * count;
                }
                model.bias[k] -= step;
            }
        }
    }
    Ok(model)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn label(id: &str) -> SpecialtyLabel {
        SpecialtyLabel::from_id(id).unwrap()
    }

    fn heart_skin_corpus() -> Vec<QAExample> {
        let mut corpus = Vec::new();
        for i in 0..10 {
            corpus.push(
                QAExample::new(
                    format!("my heart hurts since day {i}"),
                    "see a cardiologist",
                    vec![label("cardiology_hematology")],
                )
                .unwrap(),
            );
            corpus.push(
                QAExample::new(
                    format!("red spots on my skin for week {i}"),
                    "see a dermatologist",
                    vec![label("dermatology_aesthetics")],
                )
                .unwrap(),
            );
        }
        corpus
    }

    fn score_of(scores: &[LabelScore], id: &str) -> f64 {
        scores.iter().find(|s| s.label.id == id).unwrap().score
    }

    #[test]
    fn zero_model_scores_one_half() {
        let model = LinearScorerModel::zeros(64).unwrap();
        let scores = model.score_labels("anything at all").unwrap();
        assert_eq!(scores.len(), 10);
        assert!(scores.iter().all(|s| s.score == 0.5));
        let ids: Vec<_> = scores.iter().map(|s| s.label.id.as_str()).collect();
        assert!(ids.windows(2).all(|w| w[0] < w[1]));
    }

    #[test]
    fn separable_tokens_drive_score_ordering() {
        let model = train_builtin_scorer(&heart_skin_corpus(), 1024, 20, 7).unwrap();
        let scores = model.score_labels("heart").unwrap();
        assert!(score_of(&scores, "cardiology_hematology") > score_of(&scores, "dermatology_aesthetics"));
        let scores = model.score_labels("skin").unwrap();
        assert!(score_of(&scores, "dermatology_aesthetics") > score_of(&scores, "cardiology_hematology"));
    }

    #[test]
    fn training_is_deterministic() {
        let a = train_builtin_scorer(&heart_skin_corpus(), 512, 5, 42).unwrap();
        let b = train_builtin_scorer(&heart_skin_corpus(), 512, 5, 42).unwrap();
        let bits = |m: &LinearScorerModel| -> Vec<u64> {
            m.weights.iter().flatten().chain(&m.bias).map(|w| w.to_bits()).collect()
        };
        assert_eq!(bits(&a), bits(&b));
    }

    #[test]
    fn empty_corpus_is_rejected() {
        assert!(matches!(
            train_builtin_scorer(&[], 64, 1, 0),
            Err(Error::InvalidInput(_))
        ));
    }

    #[test]
    fn empty_query_is_rejected() {
        let model = LinearScorerModel::zeros(8).unwrap();
        assert!(model.score_labels("   ").is_err());
    }

    #[test]
    fn artifact_round_trips_through_json() {
        let model = train_builtin_scorer(&heart_skin_corpus(), 32, 2, 1).unwrap();
        let dir = std::env::temp_dir().join(format!("medroute-linear-{}", std::process::id()));
        std::fs::create_dir_all(&dir).unwrap();
        let path = dir.join("router.json");
        model.save(&path).unwrap();
        let json: serde_json::Value = serde_json::from_slice(&std::fs::read(&path).unwrap()).unwrap();
        for key in ["buckets", "label_order", "weights", "bias"] {
            assert!(json.get(key).is_some(), "missing {key}");
        }
        assert_eq!(LinearScorerModel::load(&path).unwrap(), model);
        std::fs::remove_dir_all(dir).ok();
    }

    #[test]
    fn malformed_artifact_is_rejected() {
        let mut model = LinearScorerModel::zeros(4).unwrap();
        model.weights[3].pop();
        assert!(model.validate().is_err());
        let mut model = LinearScorerModel::zeros(4).unwrap();
        model.label_order[0] = "dentistry".into();
        assert!(model.validate().is_err());
    }
}
