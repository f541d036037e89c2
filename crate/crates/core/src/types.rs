//! Value types exchanged between pipeline stages.
//!
//! All of these are plain immutable data: constructors check the invariants
//! once and the values are then freely cloned and sent across tasks.

use std::cmp::Ordering;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::label::{validate_full_scores, LabelScore, SpecialtyLabel};

/// How a [`RoutingDecision`] was reached.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum RoutingStrategy {
    TopN { n: usize },
    Threshold { tau: f64 },
    /// The caller addressed one specialist directly.
    Forced { label: String },
}

impl std::fmt::Display for RoutingStrategy {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            RoutingStrategy::TopN { n } => write!(f, "top-{n}"),
            RoutingStrategy::Threshold { tau } => write!(f, "threshold τ={tau}"),
            RoutingStrategy::Forced { label } => write!(f, "forced {label}"),
        }
    }
}

/// Score-descending order with label id ascending as tie-break.
pub fn rank_order(a: &LabelScore, b: &LabelScore) -> Ordering {
    b.score
        .total_cmp(&a.score)
        .then_with(|| a.label.id.cmp(&b.label.id))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RoutingDecision {
    pub strategy: RoutingStrategy,
    pub selected: Vec<LabelScore>,
    pub fallback_used: bool,
    pub all_scores: Vec<LabelScore>,
}

impl RoutingDecision {
    pub fn new(
        strategy: RoutingStrategy,
        selected: Vec<LabelScore>,
        fallback_used: bool,
        all_scores: Vec<LabelScore>,
    ) -> Result<Self> {
        let decision = RoutingDecision {
            strategy,
            selected,
            fallback_used,
            all_scores,
        };
        decision.validate()?;
        Ok(decision)
    }

    /// Routes to exactly one specialist, bypassing the selection strategy.
    /// The full score vector is kept for display.
    pub fn forced(label: &SpecialtyLabel, all_scores: Vec<LabelScore>) -> Result<Self> {
        let entry = all_scores
            .iter()
            .find(|s| s.label.id == label.id)
            .cloned()
            .ok_or_else(|| Error::UnknownLabel(label.id.clone()))?;
        RoutingDecision::new(
            RoutingStrategy::Forced {
                label: label.id.clone(),
            },
            vec![entry],
            false,
            all_scores,
        )
    }

    pub fn validate(&self) -> Result<()> {
        validate_full_scores(&self.all_scores)?;
        if self.selected.is_empty() {
            return Err(Error::invalid("routing decision selected no specialist"));
        }
        if self
            .selected
            .windows(2)
            .any(|w| rank_order(&w[0], &w[1]) != Ordering::Less)
        {
            return Err(Error::invalid(
                "selected labels must be score-descending with id-ascending ties",
            ));
        }
        for chosen in &self.selected {
            let matching = self
                .all_scores
                .iter()
                .find(|s| s.label == chosen.label)
                .ok_or_else(|| Error::UnknownLabel(chosen.label.id.clone()))?;
            if matching.score.to_bits() != chosen.score.to_bits() {
                return Err(Error::invalid(format!(
                    "selected score for `{}` differs from all_scores",
                    chosen.label.id
                )));
            }
        }
        Ok(())
    }

    pub fn selected_ids(&self) -> impl Iterator<Item = &str> {
        self.selected.iter().map(|s| s.label.id.as_str())
    }
}

/// A question with its reference answer and gold specialties.
///
/// On the wire `gold_labels` is an array of label ids.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawQAExample", into = "RawQAExample")]
pub struct QAExample {
    pub question: String,
    pub reference_answer: String,
    /// Sorted by id, no duplicates, never empty.
    pub gold_labels: Vec<SpecialtyLabel>,
}

#[derive(Serialize, Deserialize)]
struct RawQAExample {
    question: String,
    reference_answer: String,
    gold_labels: Vec<String>,
}

impl TryFrom<RawQAExample> for QAExample {
    type Error = Error;

    fn try_from(raw: RawQAExample) -> Result<Self> {
        let labels = raw
            .gold_labels
            .iter()
            .map(|id| SpecialtyLabel::from_id(id))
            .collect::<Result<Vec<_>>>()?;
        QAExample::new(raw.question, raw.reference_answer, labels)
    }
}

impl From<QAExample> for RawQAExample {
    fn from(example: QAExample) -> Self {
        RawQAExample {
            question: example.question,
            reference_answer: example.reference_answer,
            gold_labels: example.gold_labels.into_iter().map(|l| l.id).collect(),
        }
    }
}

impl QAExample {
    pub fn new(
        question: impl Into<String>,
        reference_answer: impl Into<String>,
        mut gold_labels: Vec<SpecialtyLabel>,
    ) -> Result<Self> {
        let question = question.into();
        let reference_answer = reference_answer.into();
        if question.trim().is_empty() {
            return Err(Error::invalid("question is empty"));
        }
        if reference_answer.trim().is_empty() {
            return Err(Error::invalid("reference answer is empty"));
        }
        gold_labels.sort();
        gold_labels.dedup();
        if gold_labels.is_empty() {
            return Err(Error::invalid("example has no gold label"));
        }
        Ok(QAExample {
            question,
            reference_answer,
            gold_labels,
        })
    }

    pub fn is_gold(&self, label: &SpecialtyLabel) -> bool {
        self.gold_labels.iter().any(|g| g.id == label.id)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ResponseStatus {
    Ok,
    Timeout,
    BackendError,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SpecialistResponse {
    pub specialty: SpecialtyLabel,
    pub text: String,
    pub status: ResponseStatus,
    pub latency_ms: u64,
}

impl SpecialistResponse {
    /// A successful answer. Empty text is not a usable answer and is recorded
    /// as a backend error.
    pub fn ok(specialty: SpecialtyLabel, text: impl Into<String>, latency_ms: u64) -> Self {
        let text = text.into();
        if text.trim().is_empty() {
            return SpecialistResponse::failed(specialty, ResponseStatus::BackendError, latency_ms);
        }
        SpecialistResponse {
            specialty,
            text,
            status: ResponseStatus::Ok,
            latency_ms,
        }
    }

    pub fn failed(specialty: SpecialtyLabel, status: ResponseStatus, latency_ms: u64) -> Self {
        debug_assert_ne!(status, ResponseStatus::Ok);
        SpecialistResponse {
            specialty,
            text: String::new(),
            status,
            latency_ms,
        }
    }

    pub fn is_ok(&self) -> bool {
        self.status == ResponseStatus::Ok
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FinalAnswer {
    pub text: String,
    pub decision: RoutingDecision,
    /// One entry per selected specialist, in selection order, failures included.
    pub contributions: Vec<SpecialistResponse>,
    pub reformulated_question: String,
}

impl FinalAnswer {
    pub fn new(
        text: String,
        decision: RoutingDecision,
        contributions: Vec<SpecialistResponse>,
        reformulated_question: String,
    ) -> Result<Self> {
        let aligned = contributions.len() == decision.selected.len()
            && contributions
                .iter()
                .zip(&decision.selected)
                .all(|(c, s)| c.specialty.id == s.label.id);
        if !aligned {
            return Err(Error::invalid(
                "contributions must match the selected specialists in order",
            ));
        }
        Ok(FinalAnswer {
            text,
            decision,
            contributions,
            reformulated_question,
        })
    }
}
