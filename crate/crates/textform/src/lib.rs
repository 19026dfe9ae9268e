//! Unsupervised controllable text formalization.
//!
//! The library rewrites input sentences into a more formal register without
//! parallel training data. Three off-the-shelf-style scorers (semantic
//! relatedness, n-gram fluency, Flesch-Kincaid readability) rank synonym
//! variants of a sentence; an explore/exploit loop synthesizes training
//! triples from the best variants and fits a control-conditioned GRU
//! encoder-decoder on them, so the degree of formalization becomes a
//! run-time control input.

pub mod config;
pub mod eval;
pub mod lexsampler;
pub mod neural;
pub mod par;
pub mod scorers;
pub mod textcore;
pub mod toy;
pub mod trainloop;
