//! Tokenization, vocabulary management, corpus ingestion and splitting.

use std::collections::HashMap;
use std::fmt;
use std::path::Path;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Default maximum sentence length in tokens.
pub const MAX_LEN_DEFAULT: usize = 60;

#[derive(Debug, Error)]
pub enum TextError {
    #[error("empty input: text contains no tokens")]
    EmptyInput,
    #[error("sentence too long: {len} tokens exceeds maximum {max}")]
    TooLong { len: usize, max: usize },
    #[error("token id {id} out of range for vocabulary of size {size}")]
    IdOutOfRange { id: usize, size: usize },
    #[error("split ratios sum to {sum}, expected 1.0")]
    BadRatios { sum: f64 },
    #[error("corpus too small: {n} sentences, need at least {min}")]
    CorpusTooSmall { n: usize, min: usize },
    #[error("io error reading {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
}

/// A single surface token plus its lowercased form used for lookups.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Token {
    surface: String,
    normalized: String,
}

impl Token {
    pub fn new(surface: impl Into<String>) -> Self {
        let surface = surface.into();
        assert!(!surface.is_empty(), "token surface must be non-empty");
        let normalized = surface.to_lowercase();
        Token { surface, normalized }
    }

    pub fn surface(&self) -> &str {
        &self.surface
    }

    pub fn normalized(&self) -> &str {
        &self.normalized
    }

    /// True when the token contains at least one alphanumeric character,
    /// i.e. it counts as a word rather than punctuation.
    pub fn is_word(&self) -> bool {
        self.surface.chars().any(|c| c.is_alphanumeric())
    }
}

/// An ordered, bounded sequence of tokens.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Sentence {
    tokens: Vec<Token>,
}

impl Sentence {
    pub fn new(tokens: Vec<Token>, max_len: usize) -> Result<Self, TextError> {
        if tokens.is_empty() {
            return Err(TextError::EmptyInput);
        }
        if tokens.len() > max_len {
            return Err(TextError::TooLong { len: tokens.len(), max: max_len });
        }
        Ok(Sentence { tokens })
    }

    pub fn tokens(&self) -> &[Token] {
        &self.tokens
    }

    pub fn len(&self) -> usize {
        self.tokens.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tokens.is_empty()
    }

    /// Normalized token strings, the form shared by scorers and lexicons.
    pub fn normalized(&self) -> Vec<&str> {
        self.tokens.iter().map(|t| t.normalized()).collect()
    }

    /// Key used for deduplication and lexicographic tie-breaking.
    pub fn norm_key(&self) -> String {
        self.normalized().join(" ")
    }
}

impl fmt::Display for Sentence {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for (i, t) in self.tokens.iter().enumerate() {
            if i > 0 {
                write!(f, " ")?;
            }
            write!(f, "{}", t.surface())?;
        }
        Ok(())
    }
}

/// Whitespace + punctuation-isolating tokenizer. Every non-alphanumeric,
/// non-whitespace character becomes its own token.
pub fn tokenize(text: &str) -> Result<Sentence, TextError> {
    tokenize_with(text, MAX_LEN_DEFAULT)
}

pub fn tokenize_with(text: &str, max_len: usize) -> Result<Sentence, TextError> {
    let mut tokens = Vec::new();
    let mut word = String::new();
    for ch in text.chars() {
        if ch.is_whitespace() {
            if !word.is_empty() {
                tokens.push(Token::new(std::mem::take(&mut word)));
            }
        } else if ch.is_alphanumeric() {
            word.push(ch);
        } else {
            if !word.is_empty() {
                tokens.push(Token::new(std::mem::take(&mut word)));
            }
            tokens.push(Token::new(ch.to_string()));
        }
    }
    if !word.is_empty() {
        tokens.push(Token::new(word));
    }
    Sentence::new(tokens, max_len)
}

pub const PAD: usize = 0;
pub const BOS: usize = 1;
pub const EOS: usize = 2;
pub const UNK: usize = 3;

pub const PAD_TOKEN: &str = "<pad>";
pub const BOS_TOKEN: &str = "<s>";
pub const EOS_TOKEN: &str = "</s>";
pub const UNK_TOKEN: &str = "<unk>";

const SPECIALS: [&str; 4] = [PAD_TOKEN, BOS_TOKEN, EOS_TOKEN, UNK_TOKEN];

/// Token ↔ id bijection over normalized tokens, with the four reserved
/// specials at ids 0–3.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Vocabulary {
    token_to_id: HashMap<String, usize>,
    id_to_token: Vec<String>,
}

impl Vocabulary {
    /// Frequency-filtered vocabulary: tokens with count >= `min_count` get
    /// ids ordered by (frequency desc, token asc) after the specials.
    pub fn build(corpus: &[Sentence], min_count: usize) -> Self {
        assert!(min_count >= 1, "min_count must be >= 1");
        let mut counts: HashMap<&str, usize> = HashMap::new();
        for s in corpus {
            for t in s.tokens() {
                *counts.entry(t.normalized()).or_insert(0) += 1;
            }
        }
        let mut kept: Vec<(&str, usize)> = counts
            .into_iter()
            .filter(|(w, c)| *c >= min_count && !SPECIALS.contains(w))
            .collect();
        kept.sort_by(|a, b| b.1.cmp(&a.1).then_with(|| a.0.cmp(b.0)));

        let mut id_to_token: Vec<String> = SPECIALS.iter().map(|s| s.to_string()).collect();
        id_to_token.extend(kept.into_iter().map(|(w, _)| w.to_string()));
        let token_to_id = id_to_token
            .iter()
            .enumerate()
            .map(|(i, w)| (w.clone(), i))
            .collect();
        Vocabulary { token_to_id, id_to_token }
    }

    pub fn from_tokens(id_to_token: Vec<String>) -> Self {
        debug_assert!(id_to_token.len() >= 4);
        debug_assert_eq!(&id_to_token[..4], &SPECIALS);
        let token_to_id = id_to_token
            .iter()
            .enumerate()
            .map(|(i, w)| (w.clone(), i))
            .collect();
        Vocabulary { token_to_id, id_to_token }
    }

    pub fn size(&self) -> usize {
        self.id_to_token.len()
    }

    pub fn id(&self, normalized: &str) -> usize {
        *self.token_to_id.get(normalized).unwrap_or(&UNK)
    }

    pub fn contains(&self, normalized: &str) -> bool {
        self.token_to_id.contains_key(normalized)
    }

    pub fn token(&self, id: usize) -> Option<&str> {
        self.id_to_token.get(id).map(|s| s.as_str())
    }

    pub fn tokens(&self) -> &[String] {
        &self.id_to_token
    }

    /// FNV-1a over the ordered token list; ties checkpoints to the
    /// vocabulary they were trained with.
    pub fn hash(&self) -> u64 {
        let mut h: u64 = 0xcbf29ce484222325;
        for t in &self.id_to_token {
            for b in t.as_bytes() {
                h ^= *b as u64;
                h = h.wrapping_mul(0x100000001b3);
            }
            h ^= 0xff;
            h = h.wrapping_mul(0x100000001b3);
        }
        h
    }

    /// Encode with BOS/EOS framing; out-of-vocabulary tokens map to UNK.
    pub fn encode(&self, sentence: &Sentence) -> Vec<usize> {
        let mut ids = Vec::with_capacity(sentence.len() + 2);
        ids.push(BOS);
        for t in sentence.tokens() {
            ids.push(self.id(t.normalized()));
        }
        ids.push(EOS);
        ids
    }

    /// Decode an id sequence back to a sentence, stripping specials.
    /// Decoded tokens carry their normalized form as surface.
    pub fn decode(&self, ids: &[usize]) -> Result<Sentence, TextError> {
        let mut tokens = Vec::new();
        for &id in ids {
            if id >= self.size() {
                return Err(TextError::IdOutOfRange { id, size: self.size() });
            }
            if id >= 4 {
                tokens.push(Token::new(self.id_to_token[id].clone()));
            }
        }
        if tokens.is_empty() {
            return Err(TextError::EmptyInput);
        }
        // Decoded sentences never exceed the id sequence length.
        Sentence::new(tokens, ids.len())
    }
}

/// Deterministic train/valid/test partition, with a model-selection
/// held-out slice carved from the validation split.
#[derive(Debug, Clone)]
pub struct CorpusSplit {
    pub train: Vec<Sentence>,
    pub valid: Vec<Sentence>,
    pub heldout: Vec<Sentence>,
    pub test: Vec<Sentence>,
    pub seed: u64,
}

pub const MIN_SPLIT_CORPUS: usize = 10;

pub fn split_corpus(
    corpus: &[Sentence],
    ratios: (f64, f64, f64),
    seed: u64,
    heldout_frac: f64,
) -> Result<CorpusSplit, TextError> {
    let sum = ratios.0 + ratios.1 + ratios.2;
    if (sum - 1.0).abs() > 1e-9 {
        return Err(TextError::BadRatios { sum });
    }
    if corpus.len() < MIN_SPLIT_CORPUS {
        return Err(TextError::CorpusTooSmall { n: corpus.len(), min: MIN_SPLIT_CORPUS });
    }
    let mut order: Vec<usize> = (0..corpus.len()).collect();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    order.shuffle(&mut rng);

    let n = corpus.len();
    let n_train = (ratios.0 * n as f64).round() as usize;
    let n_valid = (ratios.1 * n as f64).round() as usize;
    let n_valid = n_valid.min(n - n_train);
    let take = |idx: &[usize]| idx.iter().map(|&i| corpus[i].clone()).collect::<Vec<_>>();

    let mut valid = take(&order[n_train..n_train + n_valid]);
    let test = take(&order[n_train + n_valid..]);
    let n_held = ((valid.len() as f64) * heldout_frac).round() as usize;
    let heldout = valid.split_off(valid.len() - n_held);

    Ok(CorpusSplit {
        train: take(&order[..n_train]),
        valid,
        heldout,
        test,
        seed,
    })
}

/// Read a one-sentence-per-line UTF-8 corpus. Blank lines are skipped;
/// over-length lines are rejected at ingestion and counted.
pub fn read_corpus(path: &Path, max_len: usize) -> Result<(Vec<Sentence>, usize), TextError> {
    let text = std::fs::read_to_string(path).map_err(|e| TextError::Io {
        path: path.display().to_string(),
        source: e,
    })?;
    let mut sentences = Vec::new();
    let mut rejected = 0usize;
    for line in text.lines() {
        if line.trim().is_empty() {
            continue;
        }
        match tokenize_with(line, max_len) {
            Ok(s) => sentences.push(s),
            Err(TextError::TooLong { .. }) => {
                rejected += 1;
                log::warn!("skipping over-length line ({} max tokens): {:.40}…", max_len, line);
            }
            Err(e) => return Err(e),
        }
    }
    Ok((sentences, rejected))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sent(text: &str) -> Sentence {
        tokenize(text).unwrap()
    }

    #[test]
    fn tokenize_splits_punctuation() {
        let s = sent("The cat sat.");
        assert_eq!(s.normalized(), vec!["the", "cat", "sat", "."]);
    }

    #[test]
    fn tokenize_apostrophes() {
        // Hand-applied punctuation-split rule.
        let s = sent("don't stop");
        assert_eq!(s.normalized(), vec!["don", "'", "t", "stop"]);
    }

    #[test]
    fn tokenize_whitespace_only_errors() {
        assert!(matches!(tokenize("   "), Err(TextError::EmptyInput)));
    }

    #[test]
    fn tokenize_rejects_overlong() {
        let long = vec!["word"; 61].join(" ");
        assert!(matches!(tokenize(&long), Err(TextError::TooLong { .. })));
    }

    #[test]
    fn tokenize_idempotent_at_token_level() {
        let s = sent("A man, a plan: don't!");
        let round = tokenize(&s.to_string()).unwrap();
        assert_eq!(s.normalized(), round.normalized());
    }

    #[test]
    fn vocab_hand_counts() {
        let corpus = vec![sent("a b a")];
        let v = Vocabulary::build(&corpus, 1);
        assert_eq!(v.size(), 6);
        assert!(v.contains("a") && v.contains("b"));

        let v2 = Vocabulary::build(&corpus, 2);
        assert_eq!(v2.size(), 5);
        assert!(v2.contains("a"));
        assert_eq!(v2.id("b"), UNK);
    }

    #[test]
    fn vocab_all_rare_is_specials_only() {
        let corpus = vec![sent("x y z")];
        let v = Vocabulary::build(&corpus, 5);
        assert_eq!(v.size(), 4);
    }

    #[test]
    fn vocab_id_order_by_freq_then_token() {
        let corpus = vec![sent("b b a a c")];
        let v = Vocabulary::build(&corpus, 1);
        // a and b tie at 2; a wins alphabetically.
        assert_eq!(v.id("a"), 4);
        assert_eq!(v.id("b"), 5);
        assert_eq!(v.id("c"), 6);
    }

    #[test]
    fn encode_decode_round_trip() {
        let corpus = vec![sent("the cat sat on the mat")];
        let v = Vocabulary::build(&corpus, 1);
        let s = sent("the cat sat");
        let ids = v.encode(&s);
        assert_eq!(ids[0], BOS);
        assert_eq!(*ids.last().unwrap(), EOS);
        let back = v.decode(&ids).unwrap();
        assert_eq!(back.normalized(), s.normalized());
    }

    #[test]
    fn encode_oov_maps_to_unk() {
        let v = Vocabulary::build(&[sent("a b")], 1);
        let ids = v.encode(&sent("a zzz"));
        assert_eq!(ids[2], UNK);
    }

    #[test]
    fn decode_rejects_out_of_range() {
        let v = Vocabulary::build(&[sent("a b")], 1);
        assert!(matches!(
            v.decode(&[999]),
            Err(TextError::IdOutOfRange { id: 999, .. })
        ));
    }

    #[test]
    fn split_sizes_80_12_8() {
        let corpus: Vec<Sentence> = (0..100).map(|i| sent(&format!("word{i} here"))).collect();
        let sp = split_corpus(&corpus, (0.80, 0.12, 0.08), 7, 0.0).unwrap();
        assert_eq!(sp.train.len(), 80);
        assert_eq!(sp.valid.len() + sp.heldout.len(), 12);
        assert_eq!(sp.test.len(), 8);
    }

    #[test]
    fn split_deterministic_and_partitioning() {
        let corpus: Vec<Sentence> = (0..50).map(|i| sent(&format!("w{i}"))).collect();
        let a = split_corpus(&corpus, (0.8, 0.12, 0.08), 42, 0.5).unwrap();
        let b = split_corpus(&corpus, (0.8, 0.12, 0.08), 42, 0.5).unwrap();
        assert_eq!(a.train, b.train);
        assert_eq!(a.valid, b.valid);
        assert_eq!(a.heldout, b.heldout);
        assert_eq!(a.test, b.test);

        let mut all: Vec<String> = a
            .train
            .iter()
            .chain(&a.valid)
            .chain(&a.heldout)
            .chain(&a.test)
            .map(|s| s.norm_key())
            .collect();
        all.sort();
        let mut orig: Vec<String> = corpus.iter().map(|s| s.norm_key()).collect();
        orig.sort();
        assert_eq!(all, orig);
    }

    #[test]
    fn split_too_small_errors() {
        let corpus: Vec<Sentence> = (0..5).map(|i| sent(&format!("w{i}"))).collect();
        assert!(matches!(
            split_corpus(&corpus, (0.8, 0.12, 0.08), 1, 0.0),
            Err(TextError::CorpusTooSmall { .. })
        ));
    }

    #[test]
    fn split_bad_ratios() {
        let corpus: Vec<Sentence> = (0..20).map(|i| sent(&format!("w{i}"))).collect();
        assert!(matches!(
            split_corpus(&corpus, (0.5, 0.2, 0.2), 1, 0.0),
            Err(TextError::BadRatios { .. })
        ));
    }
}
