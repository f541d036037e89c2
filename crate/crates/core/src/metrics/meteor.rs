//! Exact-match METEOR: one-to-one unigram alignment with the maximum number
//! of matches and, among those, the fewest chunks.

use std::collections::HashMap;

use super::tokenize::TokenSequence;

/// Explored search nodes before the alignment search settles for the best
/// alignment found so far. Short inputs are always solved exactly.
const SEARCH_BUDGET: usize = 200_000;

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Alignment {
    /// `(candidate index, reference index)`, candidate-ascending.
    pub pairs: Vec<(usize, usize)>,
    pub chunks: usize,
}

impl Alignment {
    pub fn matches(&self) -> usize {
        self.pairs.len()
    }
}

struct Search {
    cand: Vec<usize>,
    reference: Vec<usize>,
    positions: Vec<Vec<usize>>,
    used: Vec<bool>,
    skips: Vec<usize>,
    current: Vec<(usize, usize)>,
    best: Option<Alignment>,
    nodes: usize,
}

impl Search {
    fn run(&mut self, i: usize, chunks: usize) {
        if self.best.as_ref().is_some_and(|b| chunks >= b.chunks) {
            return;
        }
        if i == self.cand.len() {
            self.best = Some(Alignment {
                pairs: self.current.clone(),
                chunks,
            });
            return;
        }
        self.nodes += 1;
        if self.nodes > SEARCH_BUDGET && self.best.is_some() {
            return;
        }
        let token = self.cand[i];
        let continues = self.current.last().and_then(|&(ci, rj)| {
            (ci + 1 == i && rj + 1 < self.reference.len() && self.reference[rj + 1] == token && !self.used[rj + 1])
                .then_some(rj + 1)
        });
        if let Some(j) = continues {
            self.take(i, j, chunks);
        }
        for k in 0..self.positions[token].len() {
            let j = self.positions[token][k];
            if Some(j) != continues && !self.used[j] {
                self.take(i, j, chunks + 1);
            }
        }
        if self.skips[token] > 0 {
            self.skips[token] -= 1;
            self.run(i + 1, chunks);
            self.skips[token] += 1;
        }
    }

    fn take(&mut self, i: usize, j: usize, chunks: usize) {
        self.used[j] = true;
        self.current.push((i, j));
        self.run(i + 1, chunks);
        self.current.pop();
        self.used[j] = false;
    }
}

/// Maximum-match, minimum-chunk alignment.
pub fn align(candidate: &[String], reference: &[String]) -> Alignment {
    fn intern<'a>(ids: &mut HashMap<&'a str, usize>, token: &'a str) -> usize {
        let next = ids.len();
        *ids.entry(token).or_insert(next)
    }
    let mut ids: HashMap<&str, usize> = HashMap::new();
    let cand: Vec<usize> = candidate.iter().map(|t| intern(&mut ids, t)).collect();
    let reference_ids: Vec<usize> = reference.iter().map(|t| intern(&mut ids, t)).collect();
    let vocab = ids.len();

    let mut positions = vec![Vec::new(); vocab];
    for (j, &t) in reference_ids.iter().enumerate() {
        positions[t].push(j);
    }
    let mut cand_counts = vec![0usize; vocab];
    for &t in &cand {
        cand_counts[t] += 1;
    }
    let skips = (0..vocab)
        .map(|t| cand_counts[t] - cand_counts[t].min(positions[t].len()))
        .collect();

    let mut search = Search {
        cand,
        used: vec![false; reference_ids.len()],
        reference: reference_ids,
        positions,
        skips,
        current: Vec::new(),
        best: None,
        nodes: 0,
    };
    search.run(0, 0);
    search.best.expect("a maximum matching always exists")
}

pub fn meteor(candidate: &TokenSequence, reference: &TokenSequence) -> f64 {
    let alignment = align(&candidate.tokens, &reference.tokens);
    let m = alignment.matches();
    if m == 0 {
        return 0.0;
    }
    let p = m as f64 / candidate.len() as f64;
    let r = m as f64 / reference.len() as f64;
    let f_mean = 10.0 * p * r / (r + 9.0 * p);
    let penalty = 0.5 * (alignment.chunks as f64 / m as f64).powi(3);
    f_mean * (1.0 - penalty)
}
