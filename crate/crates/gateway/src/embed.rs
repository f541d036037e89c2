//! Remote token-embedding provider for the BERT-style metric columns.
//!
//! Protocol: `POST {endpoint}/embed` with `{"texts": [...]}`, answered by
//! `{"vectors": [[...], ...]}` in input order. Every distinct token of a
//! corpus is fetched up front so the metric computation itself stays
//! synchronous.

use std::collections::{BTreeSet, HashMap};
use std::time::Duration;

use medroute_core::metrics::{tokenize, EmbeddingTable};
use medroute_core::{Error, Result};
use serde::Deserialize;
use serde_json::json;

pub const EMBED_BATCH: usize = 512;

#[derive(Deserialize)]
struct EmbedResponse {
    vectors: Vec<Vec<f64>>,
}

#[derive(Debug, Clone)]
pub struct RemoteEmbedder {
    url: String,
    http: reqwest::Client,
    timeout: Duration,
}

impl RemoteEmbedder {
    pub fn new(endpoint: &str) -> Self {
        RemoteEmbedder {
            url: format!("{}/embed", endpoint.trim_end_matches('/')),
            http: reqwest::Client::new(),
            timeout: Duration::from_secs(60),
        }
    }

    async fn fetch(&self, texts: &[String]) -> Result<Vec<Vec<f64>>> {
        let unavailable = |what: String| Error::MetricUnavailable(format!("{}: {what}", self.url));
        let response = self
            .http
            .post(&self.url)
            .timeout(self.timeout)
            .json(&json!({ "texts": texts }))
            .send()
            .await
            .map_err(|e| unavailable(e.to_string()))?;
        if !response.status().is_success() {
            return Err(unavailable(format!("HTTP {}", response.status())));
        }
        let body: EmbedResponse = response
            .json()
            .await
            .map_err(|e| unavailable(format!("malformed body: {e}")))?;
        if body.vectors.len() != texts.len() {
            return Err(unavailable(format!(
                "asked for {} vectors, got {}",
                texts.len(),
                body.vectors.len()
            )));
        }
        Ok(body.vectors)
    }

    /// Fetches a vector for every distinct token appearing in `texts`.
    pub async fn table_for<'a>(
        &self,
        texts: impl IntoIterator<Item = &'a str>,
    ) -> Result<EmbeddingTable> {
        let vocabulary: BTreeSet<String> = texts
            .into_iter()
            .flat_map(|t| tokenize(t).tokens)
            .collect();
        let vocabulary: Vec<String> = vocabulary.into_iter().collect();
        let mut vectors = HashMap::with_capacity(vocabulary.len());
        for batch in vocabulary.chunks(EMBED_BATCH) {
            let fetched = self.fetch(batch).await?;
            vectors.extend(batch.iter().cloned().zip(fetched));
        }
        EmbeddingTable::new(vectors).map_err(|e| Error::MetricUnavailable(e.to_string()))
    }
}
