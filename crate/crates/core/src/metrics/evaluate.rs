use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use super::bert::{bert_style_score, TokenEmbedder};
use super::bleu::bleu;
use super::meteor::meteor;
use super::rouge::{rouge_l, rouge_lsum, rouge_n};
use super::tokenize::tokenize;
use crate::error::{Error, Result};
use crate::types::QAExample;

pub const VARIANT_NOTE: &str = "pinned variants: lowercase alnum tokenizer; ROUGE F1; \
corpus BLEU-4 with add-one smoothing (n>=2); exact-match METEOR (no stemming/synonyms); \
greedy embedding similarity without IDF. Values are not comparable to other toolkits.";

/// Corpus averages in the column order of the usual QA comparison table.
/// The three embedding columns are `None` when the provider was unavailable.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricReport {
    pub rouge1: f64,
    pub rouge2: f64,
    #[serde(rename = "rougeL")]
    pub rouge_l: f64,
    #[serde(rename = "rougeLsum")]
    pub rouge_lsum: f64,
    pub bleu: f64,
    pub meteor: f64,
    pub bert_p: Option<f64>,
    pub bert_r: Option<f64>,
    pub bert_f1: Option<f64>,
    pub n_examples: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub bert_unavailable: Option<String>,
}

impl MetricReport {
    pub const COLUMNS: [&'static str; 9] = [
        "Rouge-1",
        "Rouge-2",
        "Rouge-L",
        "Rouge-Lsum",
        "BLEU",
        "METEOR",
        "BERT-P",
        "BERT-R",
        "BERT-F1",
    ];

    pub fn values(&self) -> [Option<f64>; 9] {
        [
            Some(self.rouge1),
            Some(self.rouge2),
            Some(self.rouge_l),
            Some(self.rouge_lsum),
            Some(self.bleu),
            Some(self.meteor),
            self.bert_p,
            self.bert_r,
            self.bert_f1,
        ]
    }

    /// Aligned text table with one header row and one value row.
    pub fn to_table(&self, system: &str) -> String {
        let mut header = format!("{:<20}", "System");
        let mut row = format!("{:<20}", system);
        for (name, value) in Self::COLUMNS.iter().zip(self.values()) {
            let width = name.len().max(6) + 2;
            let _ = write!(header, "{name:>width$}");
            let cell = value.map_or_else(|| "n/a".to_string(), |v| format!("{v:.4}"));
            let _ = write!(row, "{cell:>width$}");
        }
        let mut out = format!("{header}\n{row}\n");
        let _ = writeln!(out, "n_examples = {}", self.n_examples);
        if let Some(reason) = &self.bert_unavailable {
            let _ = writeln!(out, "BERT-style columns unavailable: {reason}");
        }
        out.push_str(VARIANT_NOTE);
        out.push('\n');
        out
    }
}

/// Per-example scores (everything except corpus-level BLEU).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExampleMetrics {
    pub rouge1: f64,
    pub rouge2: f64,
    pub rouge_l: f64,
    pub rouge_lsum: f64,
    pub meteor: f64,
    pub bert: Option<(f64, f64, f64)>,
}

fn score_one(reference: &str, output: &str, embedder: Option<&dyn TokenEmbedder>) -> Result<ExampleMetrics> {
    let cand = tokenize(output);
    let refs = tokenize(reference);
    let bert = match embedder {
        Some(embedder) => {
            let s = bert_style_score(&cand, &refs, embedder)?;
            Some((s.precision, s.recall, s.f1))
        }
        None => None,
    };
    Ok(ExampleMetrics {
        rouge1: rouge_n(&cand, &refs, 1),
        rouge2: rouge_n(&cand, &refs, 2),
        rouge_l: rouge_l(&cand, &refs),
        rouge_lsum: rouge_lsum(output, reference),
        meteor: meteor(&cand, &refs),
        bert,
    })
}

pub fn evaluate_corpus(
    examples: &[QAExample],
    system_outputs: &[String],
    embedder: Option<&dyn TokenEmbedder>,
) -> Result<MetricReport> {
    evaluate_corpus_parallel(examples, system_outputs, embedder, 1)
}

/// Same as [`evaluate_corpus`], spreading examples over `threads` workers.
/// Per-example results are reduced in input order, so the report does not
/// depend on `threads`.
pub fn evaluate_corpus_parallel(
    examples: &[QAExample],
    system_outputs: &[String],
    embedder: Option<&dyn TokenEmbedder>,
    threads: usize,
) -> Result<MetricReport> {
    if examples.len() != system_outputs.len() {
        return Err(Error::invalid(format!(
            "{} examples vs {} system outputs",
            examples.len(),
            system_outputs.len()
        )));
    }
    if examples.is_empty() {
        return Err(Error::invalid("evaluation corpus is empty"));
    }

    let run = |embedder: Option<&dyn TokenEmbedder>| -> Result<Vec<ExampleMetrics>> {
        let threads = threads.clamp(1, examples.len());
        let chunk = examples.len().div_ceil(threads);
        std::thread::scope(|scope| {
            let handles: Vec<_> = examples
                .chunks(chunk)
                .zip(system_outputs.chunks(chunk))
                .map(|(exs, outs)| {
                    scope.spawn(move || {
                        exs.iter()
                            .zip(outs)
                            .map(|(ex, out)| score_one(&ex.reference_answer, out, embedder))
                            .collect::<Result<Vec<_>>>()
                    })
                })
                .collect();
            let mut all = Vec::with_capacity(examples.len());
            for handle in handles {
                all.extend(handle.join().expect("metric worker panicked")?);
            }
            Ok(all)
        })
    };

    let (per_example, bert_unavailable) = match run(embedder) {
        Ok(rows) => (rows, None),
        Err(Error::MetricUnavailable(reason)) => (run(None)?, Some(reason)),
        Err(other) => return Err(other),
    };

    let n = per_example.len() as f64;
    let mean = |f: &dyn Fn(&ExampleMetrics) -> f64| per_example.iter().map(f).sum::<f64>() / n;
    let bert_mean = |pick: fn((f64, f64, f64)) -> f64| -> Option<f64> {
        per_example
            .iter()
            .map(|m| m.bert.map(pick))
            .sum::<Option<f64>>()
            .map(|total| total / n)
    };

    let candidates: Vec<_> = system_outputs.iter().map(|o| tokenize(o)).collect();
    let references: Vec<_> = examples.iter().map(|e| tokenize(&e.reference_answer)).collect();

    Ok(MetricReport {
        rouge1: mean(&|m| m.rouge1),
        rouge2: mean(&|m| m.rouge2),
        rouge_l: mean(&|m| m.rouge_l),
        rouge_lsum: mean(&|m| m.rouge_lsum),
        bleu: bleu(&candidates, &references)?,
        meteor: mean(&|m| m.meteor),
        bert_p: bert_mean(|b| b.0),
        bert_r: bert_mean(|b| b.1),
        bert_f1: bert_mean(|b| b.2),
        n_examples: per_example.len(),
        bert_unavailable,
    })
}
