//! F-beta threshold calibration and micro-averaged router evaluation.

use serde::{Deserialize, Serialize};

use super::select::{apply_strategy, SelectionStrategy};
use super::LabelScorer;
use crate::error::{Error, Result};
use crate::label::LabelScore;
use crate::types::QAExample;

/// Weighted harmonic mean of precision and recall; `beta > 1` favours recall.
/// Defined as 0 when both inputs are 0.
pub fn f_beta(precision: f64, recall: f64, beta: f64) -> f64 {
    let b2 = beta * beta;
    let denom = b2 * precision + recall;
    if denom == 0.0 {
        return 0.0;
    }
    (1.0 + b2) * precision * recall / denom
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Averaging {
    #[default]
    Micro,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CalibrationSpec {
    pub beta: f64,
    pub grid: Vec<f64>,
    #[serde(default)]
    pub averaging: Averaging,
}

impl CalibrationSpec {
    /// `beta` over the default grid 0.01, 0.02, …, 0.99.
    pub fn new(beta: f64) -> Result<Self> {
        Self::with_step(beta, 0.01)
    }

    /// Grid `step, 2·step, …` up to but excluding 1.
    pub fn with_step(beta: f64, step: f64) -> Result<Self> {
        if !(step > 0.0 && step < 1.0) {
            return Err(Error::invalid(format!("grid step must be in (0, 1), got {step}")));
        }
        let grid = (1..)
            .map(|i| (i as f64 * step * 1e10).round() / 1e10)
            .take_while(|&t| t < 1.0)
            .collect();
        Self::with_grid(beta, grid)
    }

    pub fn with_grid(beta: f64, grid: Vec<f64>) -> Result<Self> {
        let spec = CalibrationSpec {
            beta,
            grid,
            averaging: Averaging::Micro,
        };
        spec.validate()?;
        Ok(spec)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.beta > 0.0 && self.beta.is_finite()) {
            return Err(Error::invalid(format!("beta must be positive, got {}", self.beta)));
        }
        if self.grid.is_empty() {
            return Err(Error::invalid("calibration grid is empty"));
        }
        if self.grid.iter().any(|&t| !(t > 0.0 && t < 1.0)) {
            return Err(Error::invalid("grid thresholds must lie in (0, 1)"));
        }
        if self.grid.windows(2).any(|w| w[0] >= w[1]) {
            return Err(Error::invalid("grid must be strictly increasing"));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RouterReport {
    pub precision: f64,
    pub recall: f64,
    pub avg_specialists: f64,
    pub strategy: SelectionStrategy,
}

/// One validation example with its precomputed score vector.
#[derive(Debug, Clone, PartialEq)]
pub struct ScoredExample {
    pub scores: Vec<LabelScore>,
    pub gold: Vec<String>,
}

impl ScoredExample {
    pub fn new(scores: Vec<LabelScore>, example: &QAExample) -> Self {
        ScoredExample {
            scores,
            gold: example.gold_labels.iter().map(|l| l.id.clone()).collect(),
        }
    }
}

pub fn score_examples<S: LabelScorer + ?Sized>(
    scorer: &S,
    examples: &[QAExample],
) -> Result<Vec<ScoredExample>> {
    examples
        .iter()
        .map(|ex| Ok(ScoredExample::new(scorer.score_labels(&ex.question)?, ex)))
        .collect()
}

/// Micro-averaged precision/recall: every selection counts, fallback
/// selections included; extra labels outside the gold set are false positives.
pub fn evaluate_scored(rows: &[ScoredExample], strategy: SelectionStrategy) -> Result<RouterReport> {
    if rows.is_empty() {
        return Err(Error::invalid("evaluation set is empty"));
    }
    strategy.validate()?;
    let mut true_positives = 0usize;
    let mut selections = 0usize;
    let mut gold_total = 0usize;
    for row in rows {
        let decision = apply_strategy(&row.scores, strategy)?;
        selections += decision.selected.len();
        gold_total += row.gold.len();
        true_positives += decision
            .selected_ids()
            .filter(|id| row.gold.iter().any(|g| g == id))
            .count();
    }
    Ok(RouterReport {
        precision: true_positives as f64 / selections as f64,
        recall: if gold_total == 0 {
            0.0
        } else {
            true_positives as f64 / gold_total as f64
        },
        avg_specialists: selections as f64 / rows.len() as f64,
        strategy,
    })
}

pub fn evaluate_router<S: LabelScorer + ?Sized>(
    scorer: &S,
    testset: &[QAExample],
    strategy: SelectionStrategy,
) -> Result<RouterReport> {
    if testset.is_empty() {
        return Err(Error::invalid("test set is empty"));
    }
    evaluate_scored(&score_examples(scorer, testset)?, strategy)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GridPoint {
    pub tau: f64,
    pub precision: f64,
    pub recall: f64,
    pub f_beta: f64,
    pub avg_specialists: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CalibrationOutcome {
    pub tau: f64,
    pub beta: f64,
    pub report: RouterReport,
    pub sweep: Vec<GridPoint>,
}

/// Picks the grid threshold maximising F-beta. Ties go to the smaller
/// threshold.
pub fn calibrate_scored(rows: &[ScoredExample], spec: &CalibrationSpec) -> Result<CalibrationOutcome> {
    if rows.is_empty() {
        return Err(Error::invalid("validation set is empty"));
    }
    spec.validate()?;
    let mut sweep = Vec::with_capacity(spec.grid.len());
    let mut best: Option<(usize, f64)> = None;
    for &tau in &spec.grid {
        let report = evaluate_scored(rows, SelectionStrategy::Threshold { tau })?;
        let score = f_beta(report.precision, report.recall, spec.beta);
        // strict: an equal later (larger) tau never displaces an earlier one
        if best.is_none_or(|(_, b)| score > b) {
            best = Some((sweep.len(), score));
        }
        sweep.push(GridPoint {
            tau,
            precision: report.precision,
            recall: report.recall,
            f_beta: score,
            avg_specialists: report.avg_specialists,
        });
    }
    let (idx, _) = best.expect("grid is non-empty");
    let chosen = &sweep[idx];
    Ok(CalibrationOutcome {
        tau: chosen.tau,
        beta: spec.beta,
        report: RouterReport {
            precision: chosen.precision,
            recall: chosen.recall,
            avg_specialists: chosen.avg_specialists,
            strategy: SelectionStrategy::Threshold { tau: chosen.tau },
        },
        sweep,
    })
}

pub fn calibrate_threshold<S: LabelScorer + ?Sized>(
    scorer: &S,
    validation: &[QAExample],
    spec: &CalibrationSpec,
) -> Result<CalibrationOutcome> {
    if validation.is_empty() {
        return Err(Error::invalid("validation set is empty"));
    }
    calibrate_scored(&score_examples(scorer, validation)?, spec)
}
