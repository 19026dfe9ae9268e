//! Three-phase training: autoencoder pretraining, exploration (synthesizing
//! (input, output, control) triples by lexical sampling and scoring), and
//! exploitation (training the control predictor, freezing it, then training
//! the encoder-decoder against the composite loss). Cycle-level model
//! selection keeps the checkpoint with the best held-out mean score.

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use std::collections::{BTreeMap, HashMap};
use std::path::Path;

use crate::lexsampler::{sample_variants, select_best, sentence_rng, LexError, SampleConfig, SynonymLexicon};
use crate::neural::checkpoint::RunState;
use crate::neural::model::{teacher_forced_logits, ModelDims, ModelParams};
use crate::neural::predictor::{predict_logits, PredictorDims, PredictorInput, PredictorParams};
use crate::neural::{composite_loss, generate, Adam, NeuralError, Tape, Tensor};
use crate::par;
use crate::scorers::{ScoreBreakdown, ScoreError, ScorerWeights, ScoringContext};
use crate::textcore::{split_corpus, CorpusSplit, Sentence, TextError, Vocabulary, EOS};

use thiserror::Error;

#[derive(Debug, Error)]
pub enum TrainError {
    #[error("empty corpus")]
    EmptyCorpus,
    #[error("empty training dataset")]
    EmptyDataset,
    #[error("exploration produced zero triples in cycle {cycle}; check lexicon/scorer coverage")]
    NoTriples { cycle: usize },
    #[error("config: {msg}")]
    BadConfig { msg: String },
    #[error(transparent)]
    Neural(#[from] NeuralError),
    #[error(transparent)]
    Score(#[from] ScoreError),
    #[error(transparent)]
    Text(#[from] TextError),
    #[error(transparent)]
    Lex(#[from] LexError),
    #[error("io: {0}")]
    Io(#[from] std::io::Error),
    #[error("serialization: {0}")]
    Serde(#[from] serde_json::Error),
}

/// Formality control level: 1 retains the input, 2 and 3 request
/// increasingly formal output.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(try_from = "usize", into = "usize")]
pub enum ControlLevel {
    Retain,
    Mid,
    High,
}

impl ControlLevel {
    pub fn value(self) -> usize {
        match self {
            ControlLevel::Retain => 1,
            ControlLevel::Mid => 2,
            ControlLevel::High => 3,
        }
    }

    pub fn from_value(v: usize) -> Result<Self, NeuralError> {
        match v {
            1 => Ok(ControlLevel::Retain),
            2 => Ok(ControlLevel::Mid),
            3 => Ok(ControlLevel::High),
            _ => Err(NeuralError::InvalidControl { value: v as i64 }),
        }
    }

    pub const ALL: [ControlLevel; 3] = [ControlLevel::Retain, ControlLevel::Mid, ControlLevel::High];
}

impl TryFrom<usize> for ControlLevel {
    type Error = String;
    fn try_from(v: usize) -> Result<Self, String> {
        ControlLevel::from_value(v).map_err(|e| e.to_string())
    }
}

impl From<ControlLevel> for usize {
    fn from(c: ControlLevel) -> usize {
        c.value()
    }
}

/// Readability-ratio thresholds splitting controls; boundary values map to
/// the middle class because strict inequalities on both sides would leave
/// them undefined.
pub fn control_from_ratio(c_r: f64, zeta1: f64, zeta2: f64) -> ControlLevel {
    if c_r < zeta1 {
        ControlLevel::Retain
    } else if c_r <= zeta2 {
        ControlLevel::Mid
    } else {
        ControlLevel::High
    }
}

/// Control determination from readability scores: `c_r = r_d(y_s)/r_d(x)`.
/// When `r_d(x)` is zero the ratio is undefined; an equally unreadable
/// output maps to retain, anything else to the top class.
pub fn determine_control(
    ctx: &ScoringContext,
    x: &Sentence,
    y_s: &Sentence,
    zeta1: f64,
    zeta2: f64,
) -> Result<ControlLevel, TrainError> {
    let rd_x = ctx.readability(x)?;
    let rd_y = ctx.readability(y_s)?;
    if rd_x == 0.0 {
        return Ok(if rd_y == 0.0 { ControlLevel::Retain } else { ControlLevel::High });
    }
    Ok(control_from_ratio(rd_y / rd_x, zeta1, zeta2))
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TrainConfig {
    pub weights: ScorerWeights,
    pub zeta1: f64,
    pub zeta2: f64,
    /// Optional per-cycle threshold escalation step added to both zetas each
    /// cycle (an alternative reading of the source procedure; off by default).
    pub zeta_step_per_cycle: f64,
    pub lambda: f64,
    pub tau: f64,
    pub lr: f64,
    /// Variants sampled per sentence during exploration.
    pub k: usize,
    pub max_cycles: usize,
    pub exploit_epochs: usize,
    pub patience: usize,
    pub pretrain_epochs: usize,
    pub predictor_epochs: usize,
    pub seed: u64,
    /// Extra tokens allowed beyond the input length when decoding.
    pub decode_margin: usize,
    pub model_dims: DimsPreset,
    pub emb: usize,
    pub enc_hidden: usize,
    pub dec_hidden: usize,
}

/// Named dimension presets so config files stay flat.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum DimsPreset {
    Full,
    Desk,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            weights: ScorerWeights::default(),
            zeta1: 1.05,
            zeta2: 1.10,
            zeta_step_per_cycle: 0.0,
            lambda: 0.1,
            tau: 0.001,
            lr: 0.001,
            k: 100,
            max_cycles: 20,
            exploit_epochs: 20,
            patience: 3,
            pretrain_epochs: 30,
            predictor_epochs: 10,
            seed: 13,
            decode_margin: 5,
            model_dims: DimsPreset::Full,
            emb: 0,
            enc_hidden: 0,
            dec_hidden: 0,
        }
    }
}

impl TrainConfig {
    pub fn desk() -> Self {
        TrainConfig { model_dims: DimsPreset::Desk, ..TrainConfig::default() }
    }

    pub fn validate(&self) -> Result<(), TrainError> {
        self.weights.validate()?;
        let bad = |msg: String| Err(TrainError::BadConfig { msg });
        if !(1.0 < self.zeta1 && self.zeta1 < self.zeta2) {
            return bad(format!("need 1 < zeta1 < zeta2, got {} and {}", self.zeta1, self.zeta2));
        }
        if !(0.0..=1.0).contains(&self.lambda) {
            return bad(format!("lambda {} outside [0,1]", self.lambda));
        }
        if self.tau <= 0.0 {
            return bad(format!("tau {} must be positive", self.tau));
        }
        if self.lr <= 0.0 {
            return bad(format!("lr {} must be positive", self.lr));
        }
        if self.k == 0 {
            return bad("k must be at least 1".into());
        }
        Ok(())
    }

    pub fn dims(&self, vocab: usize) -> ModelDims {
        let mut d = match self.model_dims {
            DimsPreset::Full => ModelDims::full(vocab),
            DimsPreset::Desk => ModelDims::desk(vocab),
        };
        if self.emb > 0 {
            d.emb = self.emb;
        }
        if self.enc_hidden > 0 {
            d.enc_hidden = self.enc_hidden;
        }
        if self.dec_hidden > 0 {
            d.dec_hidden = self.dec_hidden;
        }
        d
    }

    pub fn predictor_dims(&self, vocab: usize) -> PredictorDims {
        let mut d = match self.model_dims {
            DimsPreset::Full => PredictorDims::full(vocab),
            DimsPreset::Desk => PredictorDims::desk(vocab),
        };
        if self.emb > 0 {
            d.emb = self.emb;
        }
        if self.enc_hidden > 0 {
            d.hidden = self.enc_hidden;
        }
        d
    }

    /// Thresholds in effect for a 1-based cycle number.
    pub fn zetas_for_cycle(&self, cycle: usize) -> (f64, f64) {
        let shift = self.zeta_step_per_cycle * (cycle.saturating_sub(1)) as f64;
        (self.zeta1 + shift, self.zeta2 + shift)
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct TrainingTriple {
    pub x: Sentence,
    pub y_s: Sentence,
    pub c: ControlLevel,
    pub scores: ScoreBreakdown,
    pub cycle: usize,
}

impl TrainingTriple {
    /// One JSON object per line, schema { x, y, c, g, r_s, r_f, r_d, cycle }.
    pub fn to_json_line(&self) -> String {
        serde_json::json!({
            "x": self.x.to_string(),
            "y": self.y_s.to_string(),
            "c": self.c.value(),
            "g": self.scores.g,
            "r_s": self.scores.r_s,
            "r_f": self.scores.r_f,
            "r_d": self.scores.r_d,
            "cycle": self.cycle,
        })
        .to_string()
    }
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct ExploreStats {
    pub seen: usize,
    pub emitted: usize,
    /// No variant beat the default output's score.
    pub skipped: usize,
    /// Best variant equalled the input (or decoding degenerated).
    pub discarded: usize,
    /// Emitted triples per control level value.
    pub per_control: BTreeMap<usize, usize>,
}

impl ExploreStats {
    pub fn reconciles(&self) -> bool {
        self.seen == self.emitted + self.skipped + self.discarded
            && self.per_control.values().sum::<usize>() == self.emitted
    }
}

/// Token ids of a sentence without sequence delimiters.
pub fn content_ids(vocab: &Vocabulary, s: &Sentence) -> Vec<usize> {
    let full = vocab.encode(s);
    full[1..full.len() - 1].to_vec()
}

fn decode_targets(vocab: &Vocabulary, s: &Sentence) -> Vec<usize> {
    let mut t = content_ids(vocab, s);
    t.push(EOS);
    t
}

/// FNV-1a over the little-endian bytes of every parameter, for cheap
/// mutation checks.
pub fn predictor_hash(p: &PredictorParams) -> u64 {
    let mut h: u64 = 0xcbf29ce484222325;
    p.tensors.for_each(&mut |t: &Tensor| {
        for v in &t.data {
            for b in v.to_le_bytes() {
                h ^= b as u64;
                h = h.wrapping_mul(0x100000001b3);
            }
        }
    });
    h
}

/// FNV-1a over the encoder-decoder parameters.
pub fn model_hash(m: &ModelParams) -> u64 {
    let mut h: u64 = 0xcbf29ce484222325;
    m.tensors.for_each(&mut |t: &Tensor| {
        for v in &t.data {
            for b in v.to_le_bytes() {
                h ^= b as u64;
                h = h.wrapping_mul(0x100000001b3);
            }
        }
    });
    h
}

/// Epochs without a `PRETRAIN_MIN_DELTA` improvement on the best loss
/// before pretraining stops at a plateau.
pub const PRETRAIN_PATIENCE: usize = 3;
pub const PRETRAIN_MIN_DELTA: f64 = 1e-6;

/// Autoencoder pretraining: predict the input back from itself under the
/// retain control. Stops early at a loss plateau (no improvement on the
/// best epoch loss for `PRETRAIN_PATIENCE` epochs; per-sentence stochastic
/// updates make single-epoch upticks normal). Returns per-epoch mean losses.
pub fn pretrain(
    model: &mut ModelParams,
    vocab: &Vocabulary,
    corpus: &[Sentence],
    epochs: usize,
    lr: f64,
) -> Result<Vec<f64>, TrainError> {
    if corpus.is_empty() {
        return Err(TrainError::EmptyCorpus);
    }
    let mut opt = Adam::new(lr);
    let mut losses = Vec::new();
    let encoded: Vec<(Vec<usize>, Vec<usize>)> = corpus
        .iter()
        .map(|s| (content_ids(vocab, s), decode_targets(vocab, s)))
        .collect();
    let mut best = f64::INFINITY;
    let mut bad_epochs = 0usize;
    for _epoch in 0..epochs {
        let mut total = 0.0;
        for (x_ids, targets) in &encoded {
            let mut tape = Tape::new();
            let nodes = model.bind(&mut tape);
            let logits =
                teacher_forced_logits(&mut tape, &nodes, &model.dims, x_ids, targets, 1)?;
            let loss = crate::neural::model::sequence_loss(&mut tape, &logits, targets, 1.0)?;
            total += tape.value(loss).value();
            let grads = tape.backward(loss);
            let grad_tensors: Vec<Tensor> =
                nodes.flat().iter().map(|id| grads[id.0].clone()).collect();
            opt.step_with(&grad_tensors, |f| model.tensors.for_each_mut(&mut |t| f(t)));
        }
        let mean = total / encoded.len() as f64;
        losses.push(mean);
        if mean < best - PRETRAIN_MIN_DELTA {
            best = mean;
            bad_epochs = 0;
        } else {
            bad_epochs += 1;
            if bad_epochs >= PRETRAIN_PATIENCE {
                log::info!("pretrain plateau at epoch {}: {mean:.6}", losses.len());
                break;
            }
        }
    }
    Ok(losses)
}

/// Greedy reconstruction exact-match rate of the autoencoder path.
pub fn reconstruction_accuracy(
    model: &ModelParams,
    vocab: &Vocabulary,
    corpus: &[Sentence],
    decode_margin: usize,
) -> Result<f64, TrainError> {
    if corpus.is_empty() {
        return Err(TrainError::EmptyCorpus);
    }
    let hits = par::map_indexed(corpus, |_, s| {
        let x_ids = content_ids(vocab, s);
        let out = generate(model, &x_ids, 1, x_ids.len() + decode_margin);
        matches!(out, Ok(ids) if ids == x_ids)
    });
    Ok(hits.iter().filter(|h| **h).count() as f64 / corpus.len() as f64)
}

/// Data synthesis: decode each sentence under the retain control, sample
/// lexical variants around the decoded base, keep the best-scoring variant
/// when it strictly improves on the base, and label it with Eq.-style
/// control determination. Model parameters are never touched.
pub fn explore(
    model: &ModelParams,
    vocab: &Vocabulary,
    corpus: &[Sentence],
    lexicon: &SynonymLexicon,
    ctx: &ScoringContext,
    cfg: &TrainConfig,
    cycle: usize,
) -> Result<(Vec<TrainingTriple>, ExploreStats), TrainError> {
    let (zeta1, zeta2) = cfg.zetas_for_cycle(cycle);
    let sample_cfg = SampleConfig::new(cfg.k, cfg.seed.wrapping_add(cycle as u64));

    enum Outcome {
        Emitted(Box<TrainingTriple>),
        Skipped,
        Discarded,
        Failed(String),
    }

    let outcomes = par::map_indexed(corpus, |idx, x| {
        let x_ids = content_ids(vocab, x);
        let y_g = match generate(model, &x_ids, 1, x_ids.len() + cfg.decode_margin) {
            Ok(ids) if !ids.is_empty() => match vocab.decode(&ids) {
                Ok(s) => s,
                Err(e) => return Outcome::Failed(e.to_string()),
            },
            Ok(_) => return Outcome::Skipped, // degenerate empty decode
            Err(e) => return Outcome::Failed(e.to_string()),
        };
        let mut rng = sentence_rng(sample_cfg.rng_seed, idx as u64);
        let samples = sample_variants(&y_g, lexicon, &sample_cfg, &mut rng);
        let (y_s, improved, scores) = match select_best(x, &y_g, &samples, ctx) {
            Ok(r) => r,
            Err(e) => return Outcome::Failed(e.to_string()),
        };
        if !improved {
            return Outcome::Skipped;
        }
        if y_s.norm_key() == x.norm_key() {
            return Outcome::Discarded;
        }
        let c = match determine_control(ctx, x, &y_s, zeta1, zeta2) {
            Ok(c) => c,
            Err(e) => return Outcome::Failed(e.to_string()),
        };
        Outcome::Emitted(Box::new(TrainingTriple { x: x.clone(), y_s, c, scores, cycle }))
    });

    let mut triples = Vec::new();
    let mut stats = ExploreStats { seen: corpus.len(), ..Default::default() };
    for o in outcomes {
        match o {
            Outcome::Emitted(t) => {
                *stats.per_control.entry(t.c.value()).or_insert(0) += 1;
                stats.emitted += 1;
                triples.push(*t);
            }
            Outcome::Skipped => stats.skipped += 1,
            Outcome::Discarded => stats.discarded += 1,
            Outcome::Failed(msg) => {
                log::warn!("exploration scoring failure treated as skip: {msg}");
                stats.skipped += 1;
            }
        }
    }
    Ok((triples, stats))
}

/// Deduplicate triples by (x, y_s), keeping the higher-G instance.
pub fn dedup_triples(triples: Vec<TrainingTriple>) -> Vec<TrainingTriple> {
    let mut best: HashMap<(String, String), TrainingTriple> = HashMap::new();
    for t in triples {
        let key = (t.x.norm_key(), t.y_s.norm_key());
        match best.get(&key) {
            Some(existing) if existing.scores.g >= t.scores.g => {}
            _ => {
                best.insert(key, t);
            }
        }
    }
    let mut out: Vec<TrainingTriple> = best.into_values().collect();
    out.sort_by_key(|t| (t.x.norm_key(), t.y_s.norm_key()));
    out
}

/// Supervised training of the control predictor on synthesized triples.
pub fn train_control_predictor(
    predictor: &mut PredictorParams,
    vocab: &Vocabulary,
    triples: &[TrainingTriple],
    epochs: usize,
    lr: f64,
) -> Result<(), TrainError> {
    if triples.is_empty() {
        return Err(TrainError::EmptyDataset);
    }
    let classes: std::collections::BTreeSet<usize> =
        triples.iter().map(|t| t.c.value()).collect();
    if classes.len() == 1 {
        log::warn!("predictor training data contains a single control class");
    }
    let data: Vec<(Vec<usize>, Vec<usize>, usize)> = triples
        .iter()
        .map(|t| (content_ids(vocab, &t.x), content_ids(vocab, &t.y_s), t.c.value() - 1))
        .collect();
    let mut opt = Adam::new(lr);
    for _ in 0..epochs {
        for (x_ids, y_ids, label) in &data {
            let mut tape = Tape::new();
            let nodes = predictor.bind(&mut tape);
            let logits = predict_logits(
                &mut tape,
                &nodes,
                &predictor.dims,
                x_ids,
                PredictorInput::Hard(y_ids),
            )?;
            let loss = tape.cross_entropy_logits(logits, *label, 1.0)?;
            let grads = tape.backward(loss);
            let grad_tensors: Vec<Tensor> =
                nodes.flat().iter().map(|id| grads[id.0].clone()).collect();
            opt.step_with(&grad_tensors, |f| predictor.tensors.for_each_mut(&mut |t| f(t)));
        }
    }
    Ok(())
}

/// Fraction of triples whose control the predictor classifies correctly.
pub fn predictor_accuracy(
    predictor: &PredictorParams,
    vocab: &Vocabulary,
    triples: &[TrainingTriple],
) -> Result<f64, TrainError> {
    if triples.is_empty() {
        return Err(TrainError::EmptyDataset);
    }
    let hits = par::map_indexed(triples, |_, t| {
        crate::neural::classify(predictor, &content_ids(vocab, &t.x), &content_ids(vocab, &t.y_s))
            .map(|c| c == t.c.value())
            .unwrap_or(false)
    });
    Ok(hits.iter().filter(|h| **h).count() as f64 / triples.len() as f64)
}

/// Encoder-decoder training against the composite loss with the predictor
/// frozen. The last 10% of triples (at least one) are held out as the
/// early-stopping validation slice. Returns per-epoch validation losses.
pub fn exploit(
    model: &mut ModelParams,
    predictor: &PredictorParams,
    vocab: &Vocabulary,
    triples: &[TrainingTriple],
    cfg: &TrainConfig,
) -> Result<Vec<f64>, TrainError> {
    if triples.is_empty() {
        return Err(TrainError::EmptyDataset);
    }
    let val_len = (triples.len() / 10).max(1).min(triples.len().saturating_sub(1)).max(1);
    let (train_slice, val_slice) = if triples.len() == 1 {
        (&triples[..1], &triples[..1])
    } else {
        triples.split_at(triples.len() - val_len)
    };

    let encode3 = |t: &TrainingTriple| {
        (content_ids(vocab, &t.x), decode_targets(vocab, &t.y_s), t.c.value())
    };
    let train_data: Vec<_> = train_slice.iter().map(encode3).collect();
    let val_data: Vec<_> = val_slice.iter().map(encode3).collect();

    let eval_loss = |model: &ModelParams| -> Result<f64, TrainError> {
        let mut total = 0.0;
        for (x_ids, targets, c) in &val_data {
            let mut tape = Tape::new();
            let mn = model.bind(&mut tape);
            let pn = predictor.bind(&mut tape);
            let parts = composite_loss(
                &mut tape,
                &mn,
                &model.dims,
                &pn,
                &predictor.dims,
                x_ids,
                targets,
                *c,
                cfg.lambda,
                cfg.tau,
            )?;
            total += tape.value(parts.total).value();
        }
        Ok(total / val_data.len() as f64)
    };

    let mut opt = Adam::new(cfg.lr);
    let mut val_losses = Vec::new();
    let mut best_val = f64::INFINITY;
    let mut best_model = model.clone();
    let mut bad_epochs = 0usize;
    for _epoch in 0..cfg.exploit_epochs {
        for (x_ids, targets, c) in &train_data {
            let mut tape = Tape::new();
            let mn = model.bind(&mut tape);
            let pn = predictor.bind(&mut tape);
            let parts = composite_loss(
                &mut tape,
                &mn,
                &model.dims,
                &pn,
                &predictor.dims,
                x_ids,
                targets,
                *c,
                cfg.lambda,
                cfg.tau,
            )?;
            let grads = tape.backward(parts.total);
            // Gradients flow through the soft outputs into predictor nodes,
            // but only encoder-decoder parameters are updated: frozen means
            // excluded from the optimizer, not detached from the graph.
            let grad_tensors: Vec<Tensor> =
                mn.flat().iter().map(|id| grads[id.0].clone()).collect();
            opt.step_with(&grad_tensors, |f| model.tensors.for_each_mut(&mut |t| f(t)));
        }
        let val = eval_loss(model)?;
        val_losses.push(val);
        if val < best_val {
            best_val = val;
            best_model = model.clone();
            bad_epochs = 0;
        } else {
            bad_epochs += 1;
            if bad_epochs >= cfg.patience {
                break;
            }
        }
    }
    *model = best_model;
    Ok(val_losses)
}

/// Transform a sentence under a control level. Control 1 echoes the input;
/// higher controls decode greedily. A degenerate empty decode falls back to
/// the input so the caller always gets a sentence.
pub fn transform(
    state: &RunState,
    sentence: &Sentence,
    control: usize,
    decode_margin: usize,
) -> Result<Sentence, TrainError> {
    let level = ControlLevel::from_value(control)?;
    if level == ControlLevel::Retain {
        return Ok(sentence.clone());
    }
    let x_ids = content_ids(&state.vocab, sentence);
    let out = generate(&state.model, &x_ids, control, x_ids.len() + decode_margin)?;
    if out.is_empty() {
        return Ok(sentence.clone());
    }
    Ok(state.vocab.decode(&out)?)
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct CycleRecord {
    pub cycle: usize,
    pub stats: ExploreStats,
    pub dataset_size: usize,
    pub exploit_val_losses: Vec<f64>,
    pub heldout_mean_g: f64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Manifest {
    pub config: TrainConfig,
    pub vocab_size: usize,
    pub vocab_hash: u64,
    pub split_sizes: (usize, usize, usize, usize),
    pub pretrain_losses: Vec<f64>,
    pub cycles: Vec<CycleRecord>,
    pub best_cycle: usize,
    pub best_heldout_mean_g: f64,
}

pub struct RunOutcome {
    pub best_state: RunState,
    pub manifest: Manifest,
    pub triples: Vec<TrainingTriple>,
}

/// Mean composite score of held-out sentences transformed under controls 2
/// and 3.
pub fn heldout_mean_g(
    state: &RunState,
    heldout: &[Sentence],
    ctx: &ScoringContext,
    decode_margin: usize,
) -> Result<f64, TrainError> {
    let mut total = 0.0;
    let mut n = 0usize;
    for x in heldout {
        for control in [2usize, 3] {
            let y = transform(state, x, control, decode_margin)?;
            total += ctx.composite(x, &y)?.g;
            n += 1;
        }
    }
    if n == 0 {
        return Err(TrainError::EmptyCorpus);
    }
    Ok(total / n as f64)
}

/// The full loop: pretrain once, then up to `max_cycles` rounds of
/// exploration, predictor training, and exploitation, selecting the cycle
/// whose checkpoint scores best on the held-out slice. When `out_dir` is
/// given, per-cycle checkpoints, the best checkpoint, the synthesized
/// dataset (JSON lines), and the manifest are written there.
pub fn run_training(
    cfg: &TrainConfig,
    corpus: &[Sentence],
    lexicon: &SynonymLexicon,
    ctx: &ScoringContext,
    out_dir: Option<&Path>,
) -> Result<RunOutcome, TrainError> {
    cfg.validate()?;
    if corpus.is_empty() {
        return Err(TrainError::EmptyCorpus);
    }
    let split = split_corpus(corpus, (0.8, 0.12, 0.08), cfg.seed, 0.5)?;
    run_training_split(cfg, &split, lexicon, ctx, out_dir)
}

pub fn run_training_split(
    cfg: &TrainConfig,
    split: &CorpusSplit,
    lexicon: &SynonymLexicon,
    ctx: &ScoringContext,
    out_dir: Option<&Path>,
) -> Result<RunOutcome, TrainError> {
    cfg.validate()?;
    let vocab = Vocabulary::build(&split.train, 1);
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut model = ModelParams::init(cfg.dims(vocab.size()), &mut rng);

    let pretrain_losses =
        pretrain(&mut model, &vocab, &split.train, cfg.pretrain_epochs, cfg.lr)?;

    let hyper = serde_json::to_value(cfg)?;
    let mut dataset: Vec<TrainingTriple> = Vec::new();
    let mut cycles: Vec<CycleRecord> = Vec::new();
    let mut best: Option<(usize, f64, RunState)> = None;

    if let Some(dir) = out_dir {
        std::fs::create_dir_all(dir)?;
    }

    for cycle in 1..=cfg.max_cycles {
        let (triples, stats) =
            explore(&model, &vocab, &split.train, lexicon, ctx, cfg, cycle)?;
        if cycle == 1 && triples.is_empty() {
            return Err(TrainError::NoTriples { cycle: 1 });
        }
        dataset = dedup_triples(dataset.into_iter().chain(triples).collect());
        if dataset.is_empty() {
            // Later cycles may legitimately dry up only if nothing ever
            // accumulated, which the cycle-1 guard already rejects.
            return Err(TrainError::NoTriples { cycle });
        }

        let mut predictor_rng = ChaCha8Rng::seed_from_u64(cfg.seed.wrapping_add(1000 + cycle as u64));
        let mut predictor =
            PredictorParams::init(cfg.predictor_dims(vocab.size()), &mut predictor_rng);
        train_control_predictor(&mut predictor, &vocab, &dataset, cfg.predictor_epochs, cfg.lr)?;

        let mut shuffled = dataset.clone();
        let mut order_rng = ChaCha8Rng::seed_from_u64(cfg.seed.wrapping_add(2000 + cycle as u64));
        shuffled.shuffle(&mut order_rng);
        let val_losses = exploit(&mut model, &predictor, &vocab, &shuffled, cfg)?;

        let state = RunState {
            model: model.clone(),
            predictor: Some(predictor),
            vocab: vocab.clone(),
            hyper: hyper.clone(),
        };
        let mean_g = heldout_mean_g(&state, &split.heldout, ctx, cfg.decode_margin)?;
        if let Some(dir) = out_dir {
            crate::neural::save_checkpoint(&state, &dir.join(format!("cycle-{cycle}.ckpt")))?;
        }
        cycles.push(CycleRecord {
            cycle,
            stats,
            dataset_size: dataset.len(),
            exploit_val_losses: val_losses,
            heldout_mean_g: mean_g,
        });
        let better = match &best {
            Some((_, g, _)) => mean_g > *g,
            None => true,
        };
        if better {
            best = Some((cycle, mean_g, state));
        }
    }

    let (best_cycle, best_g, best_state) = best.expect("max_cycles >= 1 produced no cycle");
    let manifest = Manifest {
        config: cfg.clone(),
        vocab_size: vocab.size(),
        vocab_hash: vocab.hash(),
        split_sizes: (
            split.train.len(),
            split.valid.len(),
            split.heldout.len(),
            split.test.len(),
        ),
        pretrain_losses,
        cycles,
        best_cycle,
        best_heldout_mean_g: best_g,
    };

    if let Some(dir) = out_dir {
        crate::neural::save_checkpoint(&best_state, &dir.join("best.ckpt"))?;
        let mut lines: Vec<String> = dataset.iter().map(|t| t.to_json_line()).collect();
        lines.push(String::new());
        std::fs::write(dir.join("dataset.jsonl"), lines.join("\n"))?;
        std::fs::write(dir.join("manifest.json"), serde_json::to_string_pretty(&manifest)?)?;
    }

    Ok(RunOutcome { best_state, manifest, triples: dataset })
}
