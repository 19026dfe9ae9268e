//! Deterministic synthetic corpus generator for desk-scale experiments.
//!
//! Each "concept" is a pair of pseudo-words: a short informal form and a
//! longer formal form with strictly more syllables, so swapping informal for
//! formal raises the grade-level readability score. The generated resources
//! are mutually consistent: the corpus mixes both registers (so the n-gram
//! model assigns mass to formal words), the lexicon maps each form to its
//! counterpart, and synonym embeddings sit close together so relatedness
//! survives substitution.

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use std::path::Path;

use crate::lexsampler::SynonymLexicon;
use crate::scorers::embedding::EmbeddingTable;
use crate::textcore::{tokenize, Sentence, TextError};

#[derive(Debug, Clone, Copy)]
pub struct ToySpec {
    pub concepts: usize,
    pub sentences: usize,
    /// Embedding dimensionality.
    pub dim: usize,
    /// Probability that a content slot uses the formal register.
    pub formal_fraction: f64,
    pub seed: u64,
}

impl Default for ToySpec {
    fn default() -> Self {
        ToySpec { concepts: 60, sentences: 500, dim: 16, formal_fraction: 0.3, seed: 47 }
    }
}

#[derive(Debug, Clone)]
pub struct ToyData {
    pub corpus: Vec<Sentence>,
    pub lexicon: SynonymLexicon,
    pub embeddings: EmbeddingTable,
    /// (informal, formal) pseudo-word pairs.
    pub pairs: Vec<(String, String)>,
}

const SYLLABLES: &[&str] = &[
    "ba", "de", "ki", "lo", "mu", "na", "po", "ri", "su", "ta", "ve", "zo", "fa", "ge", "hi",
    "ju", "wa", "ce",
];

/// Formal suffixes; each adds at least two vowel groups.
const SUFFIXES: &[&str] = &["ation", "omenia", "ivity", "ulation"];

const FILLERS: &[&str] = &["the", "a", "is", "was", "it", "on", "we", "to", "of", "and"];

fn make_pair(i: usize) -> (String, String) {
    let s = SYLLABLES.len();
    // Base-s digits of i keep informal words distinct for any concept count
    // up to s^3 (5832).
    let informal = format!(
        "{}{}{}",
        SYLLABLES[i % s],
        SYLLABLES[(i / s) % s],
        if i >= s * s { SYLLABLES[(i / (s * s)) % s] } else { "" }
    );
    let formal = format!(
        "{}{}{}",
        informal,
        SYLLABLES[(i * 7 + 3) % s],
        SUFFIXES[i % SUFFIXES.len()]
    );
    (informal, formal)
}

fn unit_noise_vector(base: &[f64], noise: f64, rng: &mut impl Rng) -> Vec<f64> {
    let mut v: Vec<f64> = base
        .iter()
        .map(|b| if noise > 0.0 { b + rng.gen_range(-noise..noise) } else { *b })
        .collect();
    let norm = v.iter().map(|x| x * x).sum::<f64>().sqrt().max(1e-12);
    for x in &mut v {
        *x /= norm;
    }
    v
}

pub fn generate(spec: &ToySpec) -> Result<ToyData, TextError> {
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let pairs: Vec<(String, String)> = (0..spec.concepts).map(make_pair).collect();

    let mut lexicon = SynonymLexicon::new();
    for (inf, fml) in &pairs {
        lexicon.insert(inf, fml);
        lexicon.insert(fml, inf);
    }

    let mut embeddings = EmbeddingTable::new(spec.dim);
    for (inf, fml) in &pairs {
        let base: Vec<f64> = (0..spec.dim).map(|_| rng.gen_range(-1.0..1.0)).collect();
        embeddings.insert(inf.clone(), unit_noise_vector(&base, 0.05, &mut rng));
        embeddings.insert(fml.clone(), unit_noise_vector(&base, 0.05, &mut rng));
    }
    for w in FILLERS {
        let base: Vec<f64> = (0..spec.dim).map(|_| rng.gen_range(-1.0..1.0)).collect();
        embeddings.insert(*w, unit_noise_vector(&base, 0.0, &mut rng));
    }

    let mut corpus = Vec::with_capacity(spec.sentences);
    for _ in 0..spec.sentences {
        let content_slots = rng.gen_range(2..=4usize);
        let mut words: Vec<&str> = Vec::new();
        for slot in 0..content_slots {
            if slot == 0 || rng.gen_bool(0.7) {
                words.push(FILLERS.choose(&mut rng).unwrap());
            }
            let (inf, fml) = pairs.choose(&mut rng).unwrap();
            if rng.gen_bool(spec.formal_fraction) {
                words.push(fml);
            } else {
                words.push(inf);
            }
        }
        corpus.push(tokenize(&words.join(" "))?);
    }

    Ok(ToyData { corpus, lexicon, embeddings, pairs })
}

impl ToyData {
    pub fn corpus_text(&self) -> String {
        let mut out = String::new();
        for s in &self.corpus {
            out.push_str(&s.to_string());
            out.push('\n');
        }
        out
    }

    /// Write corpus.txt, lexicon.tsv, and embeddings.txt into `dir`.
    pub fn write_to_dir(&self, dir: &Path) -> std::io::Result<()> {
        std::fs::create_dir_all(dir)?;
        std::fs::write(dir.join("corpus.txt"), self.corpus_text())?;
        std::fs::write(dir.join("lexicon.tsv"), self.lexicon.to_text())?;
        std::fs::write(dir.join("embeddings.txt"), self.embeddings.to_text())?;
        Ok(())
    }
}
