use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::label::{validate_full_scores, LabelScore, LABEL_COUNT};
use crate::types::{rank_order, RoutingDecision, RoutingStrategy};

/// Configurable selection strategy. Forced routing is not a strategy: it is
/// a per-request override handled by the gateway.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum SelectionStrategy {
    TopN { n: usize },
    Threshold { tau: f64 },
}

impl SelectionStrategy {
    pub fn validate(&self) -> Result<()> {
        match *self {
            SelectionStrategy::TopN { n } => check_n(n),
            SelectionStrategy::Threshold { tau } => check_tau(tau),
        }
    }
}

impl From<SelectionStrategy> for RoutingStrategy {
    fn from(strategy: SelectionStrategy) -> Self {
        match strategy {
            SelectionStrategy::TopN { n } => RoutingStrategy::TopN { n },
            SelectionStrategy::Threshold { tau } => RoutingStrategy::Threshold { tau },
        }
    }
}

impl std::fmt::Display for SelectionStrategy {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        RoutingStrategy::from(*self).fmt(f)
    }
}

fn check_n(n: usize) -> Result<()> {
    if (1..=LABEL_COUNT).contains(&n) {
        Ok(())
    } else {
        Err(Error::invalid(format!("n must be in 1..={LABEL_COUNT}, got {n}")))
    }
}

fn check_tau(tau: f64) -> Result<()> {
    if tau > 0.0 && tau < 1.0 {
        Ok(())
    } else {
        Err(Error::invalid(format!("tau must be in (0, 1), got {tau}")))
    }
}

fn ranked(scores: &[LabelScore]) -> Result<Vec<LabelScore>> {
    validate_full_scores(scores)?;
    let mut ranked = scores.to_vec();
    ranked.sort_by(rank_order);
    Ok(ranked)
}

fn id_ascending(scores: &[LabelScore]) -> Vec<LabelScore> {
    let mut all = scores.to_vec();
    all.sort_by(|a, b| a.label.id.cmp(&b.label.id));
    all
}

/// The `n` highest-scoring labels, ties broken by label id.
pub fn select_top_n(scores: &[LabelScore], n: usize) -> Result<RoutingDecision> {
    check_n(n)?;
    let mut selected = ranked(scores)?;
    selected.truncate(n);
    RoutingDecision::new(
        RoutingStrategy::TopN { n },
        selected,
        false,
        id_ascending(scores),
    )
}

/// Every label with `score >= tau`; when none qualifies, the single best
/// label with `fallback_used` set.
pub fn select_threshold(scores: &[LabelScore], tau: f64) -> Result<RoutingDecision> {
    check_tau(tau)?;
    let ranked = ranked(scores)?;
    let mut selected: Vec<LabelScore> = ranked.iter().filter(|s| s.score >= tau).cloned().collect();
    let fallback_used = selected.is_empty();
    if fallback_used {
        selected.push(ranked[0].clone());
    }
    RoutingDecision::new(
        RoutingStrategy::Threshold { tau },
        selected,
        fallback_used,
        id_ascending(scores),
    )
}

pub fn apply_strategy(scores: &[LabelScore], strategy: SelectionStrategy) -> Result<RoutingDecision> {
    match strategy {
        SelectionStrategy::TopN { n } => select_top_n(scores, n),
        SelectionStrategy::Threshold { tau } => select_threshold(scores, tau),
    }
}
