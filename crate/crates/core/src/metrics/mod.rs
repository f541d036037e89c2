//! Reference-based generation metrics.
//!
//! Variants are pinned so scores are reproducible across implementations:
//! punctuation-stripping lowercase tokenizer, ROUGE as F1, corpus BLEU-4 with
//! add-one smoothing for orders 2–4, exact-match METEOR (no stemming or
//! synonyms), and greedy-matching embedding similarity without IDF weights.
//! Scores from other toolkits will not match numerically.

mod bert;
mod bleu;
mod evaluate;
mod meteor;
mod rouge;
mod tokenize;

pub use bert::{
    bert_style_score, BertStyleScore, DeterministicEmbedder, EmbeddingKind, EmbeddingProvider,
    EmbeddingTable, HashEmbedding, TokenEmbedder,
};
pub use bleu::bleu;
pub use evaluate::{evaluate_corpus, evaluate_corpus_parallel, ExampleMetrics, MetricReport, VARIANT_NOTE};
pub use meteor::{align, meteor, Alignment};
pub use rouge::{lcs_length, rouge_l, rouge_lsum, rouge_n, split_sentences};
pub use tokenize::{tokenize, TokenSequence};
