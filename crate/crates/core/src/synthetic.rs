//! Reproducible synthetic Italian-flavoured QA corpora for tests, demos and
//! router calibration experiments.
//!
//! Each specialty owns a small keyword vocabulary. A generated question
//! mixes keywords of its gold specialty with filler words; with probability
//! `ambiguity` it also borrows a keyword from another specialty, which is
//! what makes threshold selection trade precision for recall.

use rand::seq::IndexedRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::label::{default_label_registry, SpecialtyLabel};
use crate::types::QAExample;

/// Keywords per label, in registry (id-ascending) order.
pub const KEYWORDS: [&[&str]; 10] = [
    &["cuore", "pressione", "aritmia", "palpitazioni", "anemia", "colesterolo", "tachicardia", "emoglobina"],
    &["pelle", "acne", "nei", "dermatite", "prurito", "macchie", "psoriasi", "eczema"],
    &["occhio", "vista", "orecchio", "tosse", "polmoni", "sinusite", "asma", "gola"],
    &["stomaco", "intestino", "reflusso", "colon", "gastrite", "fegato", "diarrea", "nausea"],
    &["febbre", "intervento", "ernia", "chirurgia", "analisi", "stanchezza", "cicatrice", "vaccino"],
    &["ciclo", "gravidanza", "ovaie", "utero", "mestruazioni", "pillola", "pap", "menopausa"],
    &["ansia", "depressione", "panico", "insonnia", "stress", "umore", "psicologo", "attacchi"],
    &["testa", "emicrania", "vertigini", "formicolio", "nervo", "tremore", "epilessia", "cefalea"],
    &["ginocchio", "schiena", "spalla", "frattura", "menisco", "caviglia", "lombare", "tendine"],
    &["prostata", "vescica", "reni", "urina", "erezione", "testicolo", "cistite", "calcoli"],
];

const FILLERS: &[&str] = &[
    "ho", "da", "giorni", "il", "la", "mi", "fa", "male", "un", "una", "dolore", "forte",
    "dottore", "cosa", "devo", "fare", "sempre", "quando", "dopo", "sono", "anni", "mattina",
    "sera", "settimana", "problema", "normale", "grave", "aiuto", "salve", "grazie",
];

const ANSWER_OPENERS: &[&str] = &[
    "Gentile utente, i sintomi descritti",
    "Buongiorno, quanto riferisce",
    "Salve, il quadro che descrive",
];

#[derive(Debug, Clone)]
pub struct SyntheticCorpus {
    rng: ChaCha8Rng,
    labels: Vec<SpecialtyLabel>,
    /// Probability of mixing in a keyword from a second specialty.
    pub ambiguity: f64,
}

impl SyntheticCorpus {
    pub fn new(seed: u64) -> Self {
        SyntheticCorpus {
            rng: ChaCha8Rng::seed_from_u64(seed),
            labels: default_label_registry(),
            ambiguity: 0.3,
        }
    }

    pub fn with_ambiguity(mut self, ambiguity: f64) -> Self {
        self.ambiguity = ambiguity.clamp(0.0, 1.0);
        self
    }

    /// Question text for label index `k`.
    pub fn question_for(&mut self, k: usize) -> String {
        let mut words: Vec<&str> = Vec::new();
        let n_keywords = self.rng.random_range(1..=3);
        for _ in 0..n_keywords {
            words.push(KEYWORDS[k].choose(&mut self.rng).expect("non-empty"));
        }
        if self.rng.random_bool(self.ambiguity) {
            let other = (k + self.rng.random_range(1..10)) % 10;
            words.push(KEYWORDS[other].choose(&mut self.rng).expect("non-empty"));
        }
        let n_fillers = self.rng.random_range(3..=7);
        for _ in 0..n_fillers {
            words.push(FILLERS.choose(&mut self.rng).expect("non-empty"));
        }
        // Fisher-Yates by hand keeps the dependency surface to `Rng`
        for i in (1..words.len()).rev() {
            let j = self.rng.random_range(0..=i);
            words.swap(i, j);
        }
        words.join(" ")
    }

    fn answer_for(&mut self, k: usize) -> String {
        let opener = ANSWER_OPENERS.choose(&mut self.rng).expect("non-empty");
        let a = KEYWORDS[k].choose(&mut self.rng).expect("non-empty");
        let b = KEYWORDS[k].choose(&mut self.rng).expect("non-empty");
        format!(
            "{opener} richiedono una valutazione di {}. Il riferimento a {a} e {b} va approfondito con una visita.",
            self.labels[k].display_name
        )
    }

    /// `n` single-label examples, labels assigned round-robin so every
    /// specialty is equally represented.
    pub fn generate(&mut self, n: usize) -> Vec<QAExample> {
        (0..n)
            .map(|i| {
                let k = i % self.labels.len();
                let question = self.question_for(k);
                let answer = self.answer_for(k);
                QAExample::new(question, answer, vec![self.labels[k].clone()])
                    .expect("synthetic examples are well-formed")
            })
            .collect()
    }
}
