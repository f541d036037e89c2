//! Independent brute-force oracles for the alignment-based metrics.

use medroute_core::metrics::{
    align, bleu, lcs_length, meteor, rouge_l, rouge_n, tokenize, TokenSequence,
};
use proptest::prelude::*;

/// Minimum chunk count over every maximum one-to-one exact matching,
/// found by exhaustive enumeration. Returns `(matches, chunks)`.
fn brute_force_meteor(cand: &[u8], reference: &[u8]) -> (usize, usize) {
    fn walk(
        i: usize,
        cand: &[u8],
        reference: &[u8],
        used: &mut Vec<bool>,
        pairs: &mut Vec<(usize, usize)>,
        best: &mut (usize, usize),
    ) {
        if i == cand.len() {
            let m = pairs.len();
            let chunks = pairs
                .iter()
                .enumerate()
                .filter(|(k, &(c, r))| *k == 0 || pairs[k - 1] != (c.wrapping_sub(1), r.wrapping_sub(1)))
                .count();
            if m > best.0 || (m == best.0 && chunks < best.1) {
                *best = (m, chunks);
            }
            return;
        }
        walk(i + 1, cand, reference, used, pairs, best);
        for j in 0..reference.len() {
            if !used[j] && reference[j] == cand[i] {
                used[j] = true;
                pairs.push((i, j));
                walk(i + 1, cand, reference, used, pairs, best);
                pairs.pop();
                used[j] = false;
            }
        }
    }
    let mut best = (0, usize::MAX);
    walk(0, cand, reference, &mut vec![false; reference.len()], &mut Vec::new(), &mut best);
    if best.0 == 0 {
        best.1 = 0;
    }
    best
}

fn words(seq: &[u8]) -> Vec<String> {
    seq.iter().map(|s| ["a", "b", "c"][*s as usize].to_string()).collect()
}

proptest! {
    #[test]
    fn meteor_alignment_is_chunk_minimal(
        cand in proptest::collection::vec(0u8..3, 0..=5),
        reference in proptest::collection::vec(0u8..3, 0..=5),
    ) {
        let alignment = align(&words(&cand), &words(&reference));
        let (m, chunks) = brute_force_meteor(&cand, &reference);
        prop_assert_eq!(alignment.matches(), m);
        prop_assert_eq!(alignment.chunks, chunks);
    }

    #[test]
    fn lexical_metrics_ignore_punctuation_between_words(
        cand in proptest::collection::vec(0usize..6, 1..12),
        reference in proptest::collection::vec(0usize..6, 1..12),
        marks in proptest::collection::vec(0usize..8, 12),
    ) {
        const VOCAB: [&str; 6] = ["dolore", "testa", "febbre", "da", "giorni", "l'ecografia"];
        const PUNCT: [&str; 8] = [",", ";", ":", "(", ")", "\"", "-", "«"];
        let plain = |ids: &[usize]| ids.iter().map(|&i| VOCAB[i]).collect::<Vec<_>>().join(" ");
        let noisy = |ids: &[usize]| {
            ids.iter()
                .enumerate()
                .map(|(k, &i)| format!("{}{}", VOCAB[i], PUNCT[marks[k % marks.len()]]))
                .collect::<Vec<_>>()
                .join(" ")
        };
        let (c0, r0) = (tokenize(&plain(&cand)), tokenize(&plain(&reference)));
        let (c1, r1) = (tokenize(&noisy(&cand)), tokenize(&noisy(&reference)));
        prop_assert_eq!(&c0, &c1);
        prop_assert_eq!(rouge_n(&c0, &r0, 1), rouge_n(&c1, &r1, 1));
        prop_assert_eq!(rouge_n(&c0, &r0, 2), rouge_n(&c1, &r1, 2));
        prop_assert_eq!(rouge_l(&c0, &r0), rouge_l(&c1, &r1));
        prop_assert_eq!(meteor(&c0, &r0), meteor(&c1, &r1));
        prop_assert_eq!(
            bleu(&[c0.clone()], &[r0.clone()]).unwrap(),
            bleu(&[c1.clone()], &[r1.clone()]).unwrap()
        );
    }

    #[test]
    fn metric_values_stay_in_unit_interval(
        cand in proptest::collection::vec(0u8..3, 0..10),
        reference in proptest::collection::vec(0u8..3, 0..10),
    ) {
        let c: TokenSequence = words(&cand).into_iter().collect();
        let r: TokenSequence = words(&reference).into_iter().collect();
        for v in [rouge_n(&c, &r, 1), rouge_n(&c, &r, 2), rouge_l(&c, &r), meteor(&c, &r)] {
            prop_assert!((0.0..=1.0).contains(&v));
        }
        prop_assert!(lcs_length(&cand, &reference) <= cand.len().min(reference.len()));
    }
}

#[test]
fn meteor_identity_formula() {
    for m in 1..=12usize {
        let s: TokenSequence = (0..m).map(|i| format!("t{}", i % 4)).collect();
        let expected = 1.0 - 0.5 / (m as f64).powi(3);
        assert!((meteor(&s, &s) - expected).abs() < 1e-9, "m = {m}");
    }
}
