//! The three scoring functions `r_s`, `r_f`, `r_d` and their weighted
//! combination `G`, each normalized to [0,1].

pub mod embedding;
pub mod ngram;
pub mod readability;

use std::path::Path;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::textcore::Sentence;

pub use embedding::{relatedness_score, EmbeddingTable, StopwordList};
pub use ngram::{fluency_score, train_ngram, NgramModel};
pub use readability::{count_syllables, fk_grade, readability_score, GRADE_CAP_DEFAULT};

#[derive(Debug, Error)]
pub enum ScoreError {
    #[error("sentence contains no words (punctuation only)")]
    NoWords,
    #[error("scorer weights must be nonnegative and sum to 1, got {sum}")]
    BadWeights { sum: f64 },
    #[error("n-gram order {order} out of range [1,5]")]
    OrderOutOfRange { order: usize },
    #[error("corpus too small for LM training: {n} sentences, need {min}")]
    CorpusTooSmall { n: usize, min: usize },
    #[error("{path}:{line}: {msg}")]
    Parse { path: String, line: usize, msg: String },
    #[error("{path}:{line}: dimension mismatch, expected {expected} values, got {got}")]
    DimMismatch { path: String, line: usize, expected: usize, got: usize },
    #[error("io error on {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
}

/// Weights of the linear combination; must sum to 1 so `G` stays in [0,1].
/// Note the empirical defaults put 0.6 on the language model.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ScorerWeights {
    pub beta_s: f64,
    pub beta_f: f64,
    pub beta_d: f64,
}

impl Default for ScorerWeights {
    fn default() -> Self {
        ScorerWeights { beta_s: 0.2, beta_f: 0.6, beta_d: 0.2 }
    }
}

impl ScorerWeights {
    pub fn new(beta_s: f64, beta_f: f64, beta_d: f64) -> Result<Self, ScoreError> {
        let w = ScorerWeights { beta_s, beta_f, beta_d };
        w.validate()?;
        Ok(w)
    }

    pub fn validate(&self) -> Result<(), ScoreError> {
        let sum = self.beta_s + self.beta_f + self.beta_d;
        if self.beta_s < 0.0 || self.beta_f < 0.0 || self.beta_d < 0.0 || (sum - 1.0).abs() > 1e-9 {
            return Err(ScoreError::BadWeights { sum });
        }
        Ok(())
    }
}

/// The triple (r_s, r_f, r_d) plus composite G for an (X, Y) pair.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ScoreBreakdown {
    pub r_s: f64,
    pub r_f: f64,
    pub r_d: f64,
    pub g: f64,
}

impl ScoreBreakdown {
    pub fn combine(r_s: f64, r_f: f64, r_d: f64, w: &ScorerWeights) -> Self {
        debug_assert!((0.0..=1.0).contains(&r_s));
        debug_assert!((0.0..=1.0).contains(&r_f));
        debug_assert!((0.0..=1.0).contains(&r_d));
        ScoreBreakdown {
            r_s,
            r_f,
            r_d,
            g: w.beta_s * r_s + w.beta_f * r_f + w.beta_d * r_d,
        }
    }
}

/// Read-only bundle of scoring resources; shareable across threads.
#[derive(Debug, Clone)]
pub struct ScoringContext {
    pub weights: ScorerWeights,
    pub lm: NgramModel,
    pub embeddings: EmbeddingTable,
    pub stopwords: StopwordList,
    pub grade_cap: f64,
}

impl ScoringContext {
    pub fn new(
        weights: ScorerWeights,
        lm: NgramModel,
        embeddings: EmbeddingTable,
        stopwords: StopwordList,
    ) -> Result<Self, ScoreError> {
        weights.validate()?;
        Ok(ScoringContext {
            weights,
            lm,
            embeddings,
            stopwords,
            grade_cap: GRADE_CAP_DEFAULT,
        })
    }

    /// Full composite score `G = β_s·r_s + β_f·r_f + β_d·r_d` for (x, y).
    pub fn composite(&self, x: &Sentence, y: &Sentence) -> Result<ScoreBreakdown, ScoreError> {
        let r_s = relatedness_score(x, y, &self.embeddings, &self.stopwords);
        let r_f = fluency_score(&self.lm, y);
        let r_d = readability_score(y, self.grade_cap)?;
        Ok(ScoreBreakdown::combine(r_s, r_f, r_d, &self.weights))
    }

    /// Readability of a sentence alone, used for control determination.
    pub fn readability(&self, s: &Sentence) -> Result<f64, ScoreError> {
        readability_score(s, self.grade_cap)
    }
}

/// Load the ARPA language model, embedding table, and stopword list.
pub fn load_resources(
    lm_path: &Path,
    emb_path: &Path,
    stopword_path: Option<&Path>,
) -> Result<(NgramModel, EmbeddingTable, StopwordList), ScoreError> {
    let lm = NgramModel::load_arpa(lm_path)?;
    let emb = EmbeddingTable::load(emb_path)?;
    let stop = match stopword_path {
        Some(p) => StopwordList::load(p)?,
        None => StopwordList::default_english(),
    };
    Ok((lm, emb, stop))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn weights_validate() {
        assert!(ScorerWeights::new(0.2, 0.6, 0.2).is_ok());
        assert!(matches!(
            ScorerWeights::new(0.5, 0.6, 0.2),
            Err(ScoreError::BadWeights { .. })
        ));
        assert!(ScorerWeights::new(-0.2, 1.0, 0.2).is_err());
    }

    #[test]
    fn composite_hand_arithmetic() {
        let w = ScorerWeights::new(0.2, 0.6, 0.2).unwrap();
        let b = ScoreBreakdown::combine(1.0, 0.5, 0.4, &w);
        assert!((b.g - 0.58).abs() < 1e-12);
    }

    #[test]
    fn composite_degenerate_weights() {
        let w = ScorerWeights::new(1.0, 0.0, 0.0).unwrap();
        let b = ScoreBreakdown::combine(1.0, 0.1, 0.9, &w);
        assert!((b.g - 1.0).abs() < 1e-12);
    }

    #[test]
    fn composite_convex_identity() {
        let w = ScorerWeights::default();
        for s in [0.0, 0.25, 0.7, 1.0] {
            let b = ScoreBreakdown::combine(s, s, s, &w);
            assert!((b.g - s).abs() < 1e-12);
        }
    }

    #[test]
    fn composite_monotone_in_each_component() {
        let w = ScorerWeights::default();
        let base = ScoreBreakdown::combine(0.3, 0.4, 0.5, &w);
        assert!(ScoreBreakdown::combine(0.4, 0.4, 0.5, &w).g >= base.g);
        assert!(ScoreBreakdown::combine(0.3, 0.5, 0.5, &w).g >= base.g);
        assert!(ScoreBreakdown::combine(0.3, 0.4, 0.6, &w).g >= base.g);
    }
}
