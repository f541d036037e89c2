//! Router scorers as used by the gateway: the built-in linear model or a
//! remote scoring endpoint.
//!
//! Remote protocol: `POST {endpoint}/score` with `{"text": …}`; the answer is
//! `{"scores": [...]}` with ten values in label-id order, or
//! `{"scores": {"<label id>": value, …}}` covering every label. Values are
//! clamped to `[0, 1]`.

use std::collections::HashMap;
use std::sync::Arc;
use std::time::Duration;

use medroute_core::label::{default_label_registry, LabelScore, LABEL_COUNT};
use medroute_core::router::{LabelScorer, LinearScorerModel, ScorerKind, ScorerSpec};
use medroute_core::{Error, Result};
use serde::Deserialize;
use serde_json::json;

pub const DEFAULT_SCORER_TIMEOUT_MS: u64 = 10_000;

#[derive(Debug, Clone)]
pub struct RemoteScorer {
    url: String,
    http: reqwest::Client,
    timeout: Duration,
}

#[derive(Deserialize)]
#[serde(untagged)]
enum RemoteScores {
    Ordered(Vec<f64>),
    Keyed(HashMap<String, f64>),
}

#[derive(Deserialize)]
struct ScoreBody {
    scores: RemoteScores,
}

impl RemoteScorer {
    pub fn new(endpoint: &str) -> Self {
        RemoteScorer {
            url: format!("{}/score", endpoint.trim_end_matches('/')),
            http: reqwest::Client::new(),
            timeout: Duration::from_millis(DEFAULT_SCORER_TIMEOUT_MS),
        }
    }

    pub fn with_timeout(mut self, timeout: Duration) -> Self {
        self.timeout = timeout;
        self
    }

    pub async fn score(&self, text: &str) -> Result<Vec<LabelScore>> {
        if text.trim().is_empty() {
            return Err(Error::InvalidInput("query is empty".into()));
        }
        let response = self
            .http
            .post(&self.url)
            .timeout(self.timeout)
            .json(&json!({ "text": text }))
            .send()
            .await
            .map_err(|e| Error::RoutingUnavailable(format!("{}: {e}", self.url)))?;
        let status = response.status();
        if !status.is_success() {
            return Err(Error::RoutingUnavailable(format!("{} returned HTTP {status}", self.url)));
        }
        let body = response
            .bytes()
            .await
            .map_err(|e| Error::RoutingUnavailable(format!("reading scorer body: {e}")))?;
        parse_scores(&body)
    }
}

/// Decodes a remote scorer payload into a full id-ascending score vector.
pub fn parse_scores(body: &[u8]) -> Result<Vec<LabelScore>> {
    let parsed: ScoreBody = serde_json::from_slice(body)
        .map_err(|e| Error::Protocol(format!("malformed scorer payload: {e}")))?;
    let labels = default_label_registry();
    let values: Vec<f64> = match parsed.scores {
        RemoteScores::Ordered(values) => {
            if values.len() != LABEL_COUNT {
                return Err(Error::Protocol(format!(
                    "scorer returned {} values, expected {LABEL_COUNT}",
                    values.len()
                )));
            }
            values
        }
        RemoteScores::Keyed(map) => {
            if let Some(unknown) = map.keys().find(|k| labels.iter().all(|l| &l.id != *k)) {
                return Err(Error::Protocol(format!("scorer returned unknown label `{unknown}`")));
            }
            labels
                .iter()
                .map(|l| {
                    map.get(&l.id).copied().ok_or_else(|| {
                        Error::Protocol(format!("scorer payload lacks label `{}`", l.id))
                    })
                })
                .collect::<Result<_>>()?
        }
    };
    if values.iter().any(|v| v.is_nan()) {
        return Err(Error::Protocol("scorer returned NaN".into()));
    }
    Ok(labels
        .into_iter()
        .zip(values)
        .map(|(label, v)| LabelScore {
            label,
            score: v.clamp(0.0, 1.0),
        })
        .collect())
}

/// The configured router scorer.
#[derive(Debug, Clone)]
pub enum Scorer {
    Builtin(Arc<LinearScorerModel>),
    Remote(RemoteScorer),
}

impl Scorer {
    pub fn from_spec(spec: &ScorerSpec) -> Result<Self> {
        spec.validate()?;
        match spec.kind {
            ScorerKind::BuiltinLinear => {
                let path = spec.model_artifact_path.as_ref().ok_or_else(|| {
                    Error::InvalidInput("builtin scorer requires model_artifact_path".into())
                })?;
                Ok(Scorer::Builtin(Arc::new(LinearScorerModel::load(path)?)))
            }
            ScorerKind::Remote => {
                let endpoint = spec.remote_endpoint.as_deref().unwrap_or_default();
                Ok(Scorer::Remote(RemoteScorer::new(endpoint)))
            }
        }
    }

    pub async fn score(&self, text: &str) -> Result<Vec<LabelScore>> {
        match self {
            Scorer::Builtin(model) => model.score_labels(text),
            Scorer::Remote(remote) => remote.score(text).await,
        }
    }
}
