//! The ten medical macro-categories that partition the routing label space.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub const LABEL_COUNT: usize = 10;

/// Canonical `(id, display name)` pairs, id-ascending.
const REGISTRY: [(&str, &str); LABEL_COUNT] = [
    ("cardiology_hematology", "Cardiology and Hematology"),
    ("dermatology_aesthetics", "Dermatology and Aesthetics"),
    ("eye_ent_pulmonology", "Eye, ENT and Pulmonology"),
    ("gastroenterology", "Gastroenterology"),
    ("general_medicine_surgery", "General Medicine and Surgery"),
    ("gynecology", "Gynecology"),
    ("mental_health", "Mental Health"),
    ("neurology", "Neurology"),
    ("orthopedics", "Orthopedics"),
    ("urology_andrology", "Urology and Andrology"),
];

#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct SpecialtyLabel {
    pub id: String,
    pub display_name: String,
}

impl SpecialtyLabel {
    /// Looks up a label in the default registry by id.
    pub fn from_id(id: &str) -> Result<Self> {
        REGISTRY
            .iter()
            .find(|(candidate, _)| *candidate == id)
            .map(|(id, name)| SpecialtyLabel {
                id: (*id).to_string(),
                display_name: (*name).to_string(),
            })
            .ok_or_else(|| Error::UnknownLabel(id.to_string()))
    }

    /// Position of this label in the id-ascending registry order.
    pub fn index(&self) -> Option<usize> {
        REGISTRY.iter().position(|(id, _)| *id == self.id)
    }
}

impl std::fmt::Display for SpecialtyLabel {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(&self.display_name)
    }
}

/// The ten canonical labels in id-ascending order.
pub fn default_label_registry() -> Vec<SpecialtyLabel> {
    REGISTRY
        .iter()
        .map(|(id, name)| SpecialtyLabel {
            id: (*id).to_string(),
            display_name: (*name).to_string(),
        })
        .collect()
}

pub fn label_ids() -> impl Iterator<Item = &'static str> {
    REGISTRY.iter().map(|(id, _)| *id)
}

/// Per-label independent confidence in `[0, 1]`. Scores across labels do not
/// need to sum to one.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LabelScore {
    pub label: SpecialtyLabel,
    pub score: f64,
}

impl LabelScore {
    pub fn new(label: SpecialtyLabel, score: f64) -> Result<Self> {
        if !(0.0..=1.0).contains(&score) {
            return Err(Error::invalid(format!(
                "score {score} for `{}` is outside [0, 1]",
                label.id
            )));
        }
        Ok(LabelScore { label, score })
    }
}

/// Builds a full score vector from values given in registry order.
pub fn scores_from_values(values: &[f64]) -> Result<Vec<LabelScore>> {
    if values.len() != LABEL_COUNT {
        return Err(Error::invalid(format!(
            "expected {LABEL_COUNT} scores, got {}",
            values.len()
        )));
    }
    default_label_registry()
        .into_iter()
        .zip(values)
        .map(|(label, &score)| LabelScore::new(label, score))
        .collect()
}

/// Checks that `scores` holds exactly one in-range entry per registry label.
pub fn validate_full_scores(scores: &[LabelScore]) -> Result<()> {
    if scores.len() != LABEL_COUNT {
        return Err(Error::invalid(format!(
            "score vector must cover all {LABEL_COUNT} labels, got {}",
            scores.len()
        )));
    }
    let mut seen = [false; LABEL_COUNT];
    for entry in scores {
        let idx = entry
            .label
            .index()
            .ok_or_else(|| Error::UnknownLabel(entry.label.id.clone()))?;
        if seen[idx] {
            return Err(Error::invalid(format!(
                "duplicate score for `{}`",
                entry.label.id
            )));
        }
        seen[idx] = true;
        if !(0.0..=1.0).contains(&entry.score) {
            return Err(Error::invalid(format!(
                "score {} for `{}` is outside [0, 1]",
                entry.score, entry.label.id
            )));
        }
    }
    Ok(())
}
