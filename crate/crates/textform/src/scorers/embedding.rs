//! Word-embedding table, stopword list, and the semantic relatedness score
//! (cosine similarity of stopword-filtered averaged embeddings).

use std::collections::{HashMap, HashSet};
use std::path::Path;

use crate::textcore::Sentence;

use super::ScoreError;

/// Bundled default English stopword list; overridable via file.
pub const DEFAULT_STOPWORDS: &str = include_str!("../data/stopwords.txt");

#[derive(Debug, Clone)]
pub struct EmbeddingTable {
    dim: usize,
    vectors: HashMap<String, Vec<f64>>,
}

impl EmbeddingTable {
    pub fn new(dim: usize) -> Self {
        EmbeddingTable { dim, vectors: HashMap::new() }
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn len(&self) -> usize {
        self.vectors.len()
    }

    pub fn is_empty(&self) -> bool {
        self.vectors.is_empty()
    }

    pub fn insert(&mut self, word: impl Into<String>, vec: Vec<f64>) {
        assert_eq!(vec.len(), self.dim);
        assert!(vec.iter().all(|v| v.is_finite()));
        self.vectors.insert(word.into(), vec);
    }

    pub fn get(&self, word: &str) -> Option<&[f64]> {
        self.vectors.get(word).map(|v| v.as_slice())
    }

    /// Parse "word v1 v2 … vdim" lines. The first line fixes the dimension;
    /// later mismatches are reported with their line number.
    pub fn load(path: &Path) -> Result<Self, ScoreError> {
        let text = std::fs::read_to_string(path).map_err(|e| ScoreError::Io {
            path: path.display().to_string(),
            source: e,
        })?;
        Self::parse(&text, path.display().to_string())
    }

    pub fn parse(text: &str, origin: String) -> Result<Self, ScoreError> {
        let mut dim: Option<usize> = None;
        let mut vectors = HashMap::new();
        for (lineno, line) in text.lines().enumerate() {
            let lineno = lineno + 1;
            if line.trim().is_empty() {
                continue;
            }
            let mut parts = line.split_whitespace();
            let word = parts.next().expect("non-empty line has a first field");
            let vals: Result<Vec<f64>, _> = parts.map(|p| p.parse::<f64>()).collect();
            let vals = vals.map_err(|e| ScoreError::Parse {
                path: origin.clone(),
                line: lineno,
                msg: format!("bad embedding value: {e}"),
            })?;
            if vals.iter().any(|v| !v.is_finite()) {
                return Err(ScoreError::Parse {
                    path: origin.clone(),
                    line: lineno,
                    msg: "non-finite embedding value".into(),
                });
            }
            match dim {
                None => {
                    if vals.is_empty() {
                        return Err(ScoreError::Parse {
                            path: origin.clone(),
                            line: lineno,
                            msg: "embedding line has no values".into(),
                        });
                    }
                    dim = Some(vals.len());
                }
                Some(d) if d != vals.len() => {
                    return Err(ScoreError::DimMismatch {
                        path: origin.clone(),
                        line: lineno,
                        expected: d,
                        got: vals.len(),
                    });
                }
                _ => {}
            }
            vectors.insert(word.to_lowercase(), vals);
        }
        let dim = dim.ok_or(ScoreError::Parse {
            path: origin,
            line: 0,
            msg: "empty embedding file".into(),
        })?;
        Ok(EmbeddingTable { dim, vectors })
    }

    /// Serialize back to the text format.
    pub fn to_text(&self) -> String {
        let mut words: Vec<&String> = self.vectors.keys().collect();
        words.sort();
        let mut out = String::new();
        for w in words {
            out.push_str(w);
            for v in &self.vectors[w] {
                out.push(' ');
                out.push_str(&format!("{v}"));
            }
            out.push('\n');
        }
        out
    }
}

#[derive(Debug, Clone)]
pub struct StopwordList {
    words: HashSet<String>,
}

impl StopwordList {
    pub fn default_english() -> Self {
        Self::parse(DEFAULT_STOPWORDS)
    }

    pub fn parse(text: &str) -> Self {
        let words = text
            .lines()
            .map(|l| l.trim().to_lowercase())
            .filter(|l| !l.is_empty())
            .collect();
        StopwordList { words }
    }

    pub fn load(path: &Path) -> Result<Self, ScoreError> {
        let text = std::fs::read_to_string(path).map_err(|e| ScoreError::Io {
            path: path.display().to_string(),
            source: e,
        })?;
        Ok(Self::parse(&text))
    }

    pub fn contains(&self, word: &str) -> bool {
        self.words.contains(word)
    }

    pub fn len(&self) -> usize {
        self.words.len()
    }

    pub fn is_empty(&self) -> bool {
        self.words.is_empty()
    }
}

fn average_content_vector(
    sentence: &Sentence,
    emb: &EmbeddingTable,
    stop: &StopwordList,
) -> Option<Vec<f64>> {
    let mut sum = vec![0.0; emb.dim()];
    let mut n = 0usize;
    for tok in sentence.tokens() {
        let w = tok.normalized();
        if stop.contains(w) {
            continue;
        }
        if let Some(v) = emb.get(w) {
            for (s, x) in sum.iter_mut().zip(v) {
                *s += x;
            }
            n += 1;
        }
    }
    if n == 0 {
        return None;
    }
    for s in &mut sum {
        *s /= n as f64;
    }
    Some(sum)
}

fn cosine(a: &[f64], b: &[f64]) -> f64 {
    let dot: f64 = a.iter().zip(b).map(|(x, y)| x * y).sum();
    let na: f64 = a.iter().map(|x| x * x).sum::<f64>().sqrt();
    let nb: f64 = b.iter().map(|x| x * x).sum::<f64>().sqrt();
    if na == 0.0 || nb == 0.0 {
        return 0.0;
    }
    dot / (na * nb)
}

/// Semantic relatedness `r_s`: cosine of averaged content-word embeddings,
/// clamped to [0,1]. Sides without embeddable content tokens score 0.
pub fn relatedness_score(
    x: &Sentence,
    y: &Sentence,
    emb: &EmbeddingTable,
    stop: &StopwordList,
) -> f64 {
    let (ax, ay) = match (
        average_content_vector(x, emb, stop),
        average_content_vector(y, emb, stop),
    ) {
        (Some(a), Some(b)) => (a, b),
        _ => return 0.0,
    };
    cosine(&ax, &ay).clamp(0.0, 1.0)
}
