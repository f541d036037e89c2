//! Multi-label specialty routing.
//!
//! A scorer assigns every registry label an independent confidence in
//! `[0, 1]`; a selection strategy (top-n or global threshold) turns the score
//! vector into a [`RoutingDecision`](crate::RoutingDecision). Thresholds are
//! calibrated by maximising micro-averaged F-beta over a validation set.

mod calibrate;
mod linear;
mod select;

use std::path::PathBuf;

use serde::{Deserialize, Serialize};

pub use calibrate::{
    calibrate_scored, calibrate_threshold, evaluate_router, evaluate_scored, f_beta,
    score_examples, CalibrationOutcome, CalibrationSpec, GridPoint, RouterReport, ScoredExample,
};
pub use linear::{hash_bucket, train_builtin_scorer, LinearScorerModel, DEFAULT_BUCKETS};
pub use select::{apply_strategy, select_threshold, select_top_n, SelectionStrategy};

use crate::error::{Error, Result};
use crate::label::LabelScore;

/// Anything that can produce a full, id-ascending score vector for a query.
pub trait LabelScorer {
    fn score_labels(&self, query: &str) -> Result<Vec<LabelScore>>;
}

impl<F> LabelScorer for F
where
    F: Fn(&str) -> Result<Vec<LabelScore>>,
{
    fn score_labels(&self, query: &str) -> Result<Vec<LabelScore>> {
        self(query)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ScorerKind {
    BuiltinLinear,
    Remote,
}

/// Where routing scores come from.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScorerSpec {
    pub kind: ScorerKind,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub remote_endpoint: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub model_artifact_path: Option<PathBuf>,
}

impl ScorerSpec {
    pub fn validate(&self) -> Result<()> {
        match self.kind {
            ScorerKind::Remote if self.remote_endpoint.as_deref().is_none_or(str::is_empty) => Err(
                Error::invalid("remote scorer requires `remote_endpoint`"),
            ),
            ScorerKind::BuiltinLinear if self.model_artifact_path.is_none() => Err(
                Error::invalid("builtin_linear scorer requires `model_artifact_path`"),
            ),
            _ => Ok(()),
        }
    }
}
