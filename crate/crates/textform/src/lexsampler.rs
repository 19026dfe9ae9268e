//! Synonym lexicon management and the K-sample lexical variation strategy,
//! plus best-sample selection against the composite score.

use std::collections::{BTreeMap, BTreeSet, HashSet};
use std::path::Path;

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use thiserror::Error;

use crate::scorers::{ScoreBreakdown, ScoreError, ScoringContext};
use crate::textcore::{Sentence, Token};

#[derive(Debug, Error)]
pub enum LexError {
    #[error("{path}:{line}: {msg}")]
    Parse { path: String, line: usize, msg: String },
    #[error("io error on {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
}

/// word → ordered synonym set over normalized single tokens. A word is
/// never its own listed synonym; the sampler adds the identity choice.
#[derive(Debug, Clone, Default)]
pub struct SynonymLexicon {
    entries: BTreeMap<String, BTreeSet<String>>,
}

impl SynonymLexicon {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn insert(&mut self, word: &str, synonym: &str) {
        let word = word.to_lowercase();
        let synonym = synonym.to_lowercase();
        if word == synonym || synonym.split_whitespace().count() != 1 {
            return;
        }
        self.entries.entry(word).or_default().insert(synonym);
    }

    pub fn get(&self, word: &str) -> Option<&BTreeSet<String>> {
        self.entries.get(word)
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn words(&self) -> impl Iterator<Item = &String> {
        self.entries.keys()
    }

    /// Parse lines of the form `word<TAB>syn1|syn2|…`. Duplicate headwords
    /// merge; multi-word synonyms and empty entries are dropped with a
    /// warning.
    pub fn load(path: &Path) -> Result<Self, LexError> {
        let text = std::fs::read_to_string(path).map_err(|e| LexError::Io {
            path: path.display().to_string(),
            source: e,
        })?;
        Self::parse(&text, path.display().to_string())
    }

    pub fn parse(text: &str, origin: String) -> Result<Self, LexError> {
        let mut lex = SynonymLexicon::new();
        for (lineno, line) in text.lines().enumerate() {
            let lineno = lineno + 1;
            if line.trim().is_empty() {
                continue;
            }
            let (word, syns) = line.split_once('\t').ok_or_else(|| LexError::Parse {
                path: origin.clone(),
                line: lineno,
                msg: "expected word<TAB>syn1|syn2|…".into(),
            })?;
            let word = word.trim();
            if word.is_empty() {
                return Err(LexError::Parse {
                    path: origin.clone(),
                    line: lineno,
                    msg: "empty headword".into(),
                });
            }
            let mut added = 0usize;
            for syn in syns.split('|') {
                let syn = syn.trim();
                if syn.is_empty() {
                    continue;
                }
                if syn.split_whitespace().count() != 1 {
                    log::warn!("{origin}:{lineno}: dropping multi-word synonym {syn:?}");
                    continue;
                }
                lex.insert(word, syn);
                added += 1;
            }
            if added == 0 {
                log::warn!("{origin}:{lineno}: no usable synonyms for {word:?}, line skipped");
            }
        }
        Ok(lex)
    }

    pub fn to_text(&self) -> String {
        let mut out = String::new();
        for (word, syns) in &self.entries {
            let list: Vec<&str> = syns.iter().map(|s| s.as_str()).collect();
            out.push_str(&format!("{word}\t{}\n", list.join("|")));
        }
        out
    }
}

#[derive(Debug, Clone, Copy)]
pub struct SampleConfig {
    pub k: usize,
    pub max_attempts: usize,
    pub rng_seed: u64,
}

impl SampleConfig {
    pub fn new(k: usize, rng_seed: u64) -> Self {
        assert!(k >= 1);
        SampleConfig { k, max_attempts: 20 * k, rng_seed }
    }
}

impl Default for SampleConfig {
    fn default() -> Self {
        Self::new(100, 0)
    }
}

/// Per-sentence RNG stream so parallel and serial exploration agree.
pub fn sentence_rng(seed: u64, sentence_index: u64) -> ChaCha8Rng {
    // splitmix64-style mixing of (seed, index) into one stream seed.
    let mut z = seed ^ sentence_index.wrapping_mul(0x9e3779b97f4a7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58476d1ce4e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d049bb133111eb);
    z ^= z >> 31;
    ChaCha8Rng::seed_from_u64(z)
}

/// Draw up to K distinct lexical variants of `sentence`, each differing from
/// it. Every token with a lexicon entry is independently replaced by a
/// uniform choice over {original} ∪ synonyms.
pub fn sample_variants(
    sentence: &Sentence,
    lex: &SynonymLexicon,
    cfg: &SampleConfig,
    rng: &mut ChaCha8Rng,
) -> Vec<Sentence> {
    // Candidate lists per position: original first, then sorted synonyms.
    let slots: Vec<Option<Vec<&str>>> = sentence
        .tokens()
        .iter()
        .map(|t| {
            lex.get(t.normalized()).map(|syns| {
                let mut v = Vec::with_capacity(syns.len() + 1);
                v.push(t.normalized());
                v.extend(syns.iter().map(|s| s.as_str()));
                v
            })
        })
        .collect();
    if slots.iter().all(|s| s.is_none()) {
        return Vec::new();
    }

    let input_key = sentence.norm_key();
    let mut seen: HashSet<String> = HashSet::new();
    let mut out = Vec::new();
    for _ in 0..cfg.max_attempts {
        if out.len() >= cfg.k {
            break;
        }
        let tokens: Vec<Token> = sentence
            .tokens()
            .iter()
            .zip(&slots)
            .map(|(tok, slot)| match slot {
                Some(cands) => {
                    let pick = cands[rng.gen_range(0..cands.len())];
                    if pick == tok.normalized() {
                        tok.clone()
                    } else {
                        Token::new(pick)
                    }
                }
                None => tok.clone(),
            })
            .collect();
        let variant = Sentence::new(tokens, sentence.len())
            .expect("substitution preserves token count");
        let key = variant.norm_key();
        if key == input_key || !seen.insert(key) {
            continue;
        }
        out.push(variant);
    }
    out
}

/// Argmax of `G(x, ·)` over `{y_g} ∪ samples`. Ties go to `y_g`, then to the
/// lexicographically smaller token sequence, so selection is reproducible.
pub fn select_best(
    x: &Sentence,
    y_g: &Sentence,
    samples: &[Sentence],
    ctx: &ScoringContext,
) -> Result<(Sentence, bool, ScoreBreakdown), ScoreError> {
    let base = ctx.composite(x, y_g)?;
    let mut best: Option<(f64, String, &Sentence, ScoreBreakdown)> = None;
    for s in samples {
        let sc = ctx.composite(x, s)?;
        if sc.g <= base.g {
            continue;
        }
        let key = s.norm_key();
        let better = match &best {
            None => true,
            Some((bg, bkey, _, _)) => sc.g > *bg || (sc.g == *bg && key < *bkey),
        };
        if better {
            best = Some((sc.g, key, s, sc));
        }
    }
    match best {
        Some((_, _, s, sc)) => Ok((s.clone(), true, sc)),
        None => Ok((y_g.clone(), false, base)),
    }
}
