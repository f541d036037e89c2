use super::rouge::clipped_overlap;
use super::tokenize::TokenSequence;
use crate::error::{Error, Result};

const MAX_ORDER: usize = 4;

/// Corpus-level BLEU-4.
///
/// Clipped n-gram matches and totals are pooled over the corpus. Orders 2–4
/// use add-one smoothing `(m + 1) / (t + 1)`; unigram precision is unsmoothed
/// and a zero unigram precision yields 0. Brevity penalty `exp(1 − r/c)`
/// applies when the pooled candidate length `c` is below the reference
/// length `r`.
pub fn bleu(candidates: &[TokenSequence], references: &[TokenSequence]) -> Result<f64> {
    if candidates.len() != references.len() {
        return Err(Error::invalid(format!(
            "bleu: {} candidates vs {} references",
            candidates.len(),
            references.len()
        )));
    }
    if candidates.is_empty() {
        return Err(Error::invalid("bleu: empty corpus"));
    }
    let mut matches = [0usize; MAX_ORDER];
    let mut totals = [0usize; MAX_ORDER];
    let (mut cand_len, mut ref_len) = (0usize, 0usize);
    for (cand, reference) in candidates.iter().zip(references) {
        cand_len += cand.len();
        ref_len += reference.len();
        for n in 1..=MAX_ORDER {
            let (m, t, _) = clipped_overlap(&cand.tokens, &reference.tokens, n);
            matches[n - 1] += m;
            totals[n - 1] += t;
        }
    }
    if matches[0] == 0 || totals[0] == 0 {
        return Ok(0.0);
    }
    let log_sum: f64 = (0..MAX_ORDER)
        .map(|k| {
            let p = if k == 0 {
                matches[0] as f64 / totals[0] as f64
            } else {
                (matches[k] + 1) as f64 / (totals[k] + 1) as f64
            };
            p.ln()
        })
        .sum();
    let brevity = if cand_len < ref_len {
        (1.0 - ref_len as f64 / cand_len as f64).exp()
    } else {
        1.0
    };
    Ok(brevity * (log_sum / MAX_ORDER as f64).exp())
}
