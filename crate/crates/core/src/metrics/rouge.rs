//! ROUGE-N, ROUGE-L and ROUGE-Lsum as F1 scores.

use std::collections::HashMap;

use super::tokenize::{tokenize, TokenSequence};

fn f1(matches: usize, cand_total: usize, ref_total: usize) -> f64 {
    if matches == 0 || cand_total == 0 || ref_total == 0 {
        return 0.0;
    }
    let p = matches as f64 / cand_total as f64;
    let r = matches as f64 / ref_total as f64;
    2.0 * p * r / (p + r)
}

pub(crate) fn ngram_counts(tokens: &[String], n: usize) -> HashMap<&[String], usize> {
    let mut counts = HashMap::new();
    if n > 0 && tokens.len() >= n {
        for gram in tokens.windows(n) {
            *counts.entry(gram).or_insert(0) += 1;
        }
    }
    counts
}

/// Clipped overlap plus the two n-gram totals.
pub(crate) fn clipped_overlap(cand: &[String], reference: &[String], n: usize) -> (usize, usize, usize) {
    let cand_counts = ngram_counts(cand, n);
    let ref_counts = ngram_counts(reference, n);
    let matches = cand_counts
        .iter()
        .map(|(gram, &c)| c.min(ref_counts.get(gram).copied().unwrap_or(0)))
        .sum();
    let total = |len: usize| (len + 1).saturating_sub(n);
    (matches, total(cand.len()), total(reference.len()))
}

/// ROUGE-N F1 (`n` is 1 or 2).
pub fn rouge_n(candidate: &TokenSequence, reference: &TokenSequence, n: usize) -> f64 {
    assert!(matches!(n, 1 | 2), "rouge_n supports n in {{1, 2}}, got {n}");
    let (matches, cand_total, ref_total) = clipped_overlap(&candidate.tokens, &reference.tokens, n);
    f1(matches, cand_total, ref_total)
}

/// Full LCS table; `table[i][j]` is the LCS length of `a[..i]` and `b[..j]`.
fn lcs_table<T: PartialEq>(a: &[T], b: &[T]) -> Vec<Vec<usize>> {
    let mut table = vec![vec![0usize; b.len() + 1]; a.len() + 1];
    for i in 1..=a.len() {
        for j in 1..=b.len() {
            table[i][j] = if a[i - 1] == b[j - 1] {
                table[i - 1][j - 1] + 1
            } else {
                table[i - 1][j].max(table[i][j - 1])
            };
        }
    }
    table
}

pub fn lcs_length<T: PartialEq>(a: &[T], b: &[T]) -> usize {
    lcs_table(a, b)[a.len()][b.len()]
}

/// Indices into `a` of one longest common subsequence with `b`.
fn lcs_indices<T: PartialEq>(a: &[T], b: &[T]) -> Vec<usize> {
    let table = lcs_table(a, b);
    let (mut i, mut j) = (a.len(), b.len());
    let mut out = Vec::with_capacity(table[i][j]);
    while i > 0 && j > 0 {
        if a[i - 1] == b[j - 1] {
            out.push(i - 1);
            i -= 1;
            j -= 1;
        } else if table[i - 1][j] >= table[i][j - 1] {
            i -= 1;
        } else {
            j -= 1;
        }
    }
    out.reverse();
    out
}

pub fn rouge_l(candidate: &TokenSequence, reference: &TokenSequence) -> f64 {
    let lcs = lcs_length(&candidate.tokens, &reference.tokens);
    f1(lcs, candidate.len(), reference.len())
}

/// Splits on `.`, `!`, `?` and newlines, dropping sentences with no tokens.
pub fn split_sentences(text: &str) -> Vec<TokenSequence> {
    text.split(['.', '!', '?', '\n'])
        .map(tokenize)
        .filter(|s| !s.is_empty())
        .collect()
}

/// Summary-level ROUGE-L: for each reference sentence, the union of its LCS
/// hits against every candidate sentence, with hits clipped by token counts.
pub fn rouge_lsum(candidate_text: &str, reference_text: &str) -> f64 {
    let cand_sents = split_sentences(candidate_text);
    let ref_sents = split_sentences(reference_text);
    let cand_total: usize = cand_sents.iter().map(TokenSequence::len).sum();
    let ref_total: usize = ref_sents.iter().map(TokenSequence::len).sum();
    if cand_total == 0 || ref_total == 0 {
        return 0.0;
    }

    let mut cand_budget: HashMap<&str, usize> = HashMap::new();
    for tok in cand_sents.iter().flat_map(|s| &s.tokens) {
        *cand_budget.entry(tok).or_insert(0) += 1;
    }
    let mut ref_budget: HashMap<&str, usize> = HashMap::new();
    for tok in ref_sents.iter().flat_map(|s| &s.tokens) {
        *ref_budget.entry(tok).or_insert(0) += 1;
    }

    let mut hits = 0usize;
    for ref_sent in &ref_sents {
        let mut union: Vec<usize> = cand_sents
            .iter()
            .flat_map(|c| lcs_indices(&ref_sent.tokens, &c.tokens))
            .collect();
        union.sort_unstable();
        union.dedup();
        for idx in union {
            let tok = ref_sent.tokens[idx].as_str();
            let c = cand_budget.get_mut(tok);
            let r = ref_budget.get_mut(tok);
            if let (Some(c), Some(r)) = (c, r) {
                if *c > 0 && *r > 0 {
                    *c -= 1;
                    *r -= 1;
                    hits += 1;
                }
            }
        }
    }
    f1(hits, cand_total, ref_total)
}
