//! Backoff n-gram language model: interpolated Kneser-Ney training with a
//! fixed 0.75 discount, ARPA import/export, and the fluency score.
//!
//! Orders ≥ 2 train on sentences padded with `order-1` BOS markers and one
//! EOS. Order 1 is the degenerate case and reduces to plain unigram MLE
//! over unpadded tokens.

use std::collections::{BTreeMap, HashMap, HashSet};
use std::path::Path;

use crate::textcore::{Sentence, BOS_TOKEN, EOS_TOKEN, UNK_TOKEN};

use super::ScoreError;

/// Kneser-Ney absolute discount.
pub const KN_DISCOUNT: f64 = 0.75;
/// Minimum corpus size for smoothed (order ≥ 2) training.
pub const MIN_LM_CORPUS: usize = 50;
/// Probability floor applied at query time so fluency never hits log(0);
/// only reachable through the order-1 MLE degenerate case.
const PROB_FLOOR: f64 = 1e-12;
/// ARPA placeholder for grams that exist only as contexts (BOS runs).
const LOG10_PLACEHOLDER: f64 = -99.0;

type Gram = Vec<String>;

#[derive(Debug, Clone)]
pub struct NgramModel {
    order: usize,
    /// `probs[k-1]`: k-gram → log10 probability.
    probs: Vec<HashMap<Gram, f64>>,
    /// `backoffs[k-1]`: k-gram context → log10 backoff weight.
    backoffs: Vec<HashMap<Gram, f64>>,
    /// Words carrying unigram entries, BOS excluded: the predicted space.
    vocab: Vec<String>,
}

impl NgramModel {
    pub fn order(&self) -> usize {
        self.order
    }

    /// Words the model can predict (unigram entries minus BOS).
    pub fn predicted_vocab(&self) -> &[String] {
        &self.vocab
    }

    pub fn num_entries(&self, order: usize) -> usize {
        self.probs.get(order - 1).map_or(0, |m| m.len())
    }

    /// All contexts of the given length observed ahead of some entry.
    pub fn contexts(&self, len: usize) -> Vec<Gram> {
        let mut set: HashSet<Gram> = HashSet::new();
        if let Some(map) = self.probs.get(len) {
            for g in map.keys() {
                set.insert(g[..len].to_vec());
            }
        }
        let mut v: Vec<Gram> = set.into_iter().collect();
        v.sort();
        v
    }

    fn lookup_log10(&self, gram: &[String]) -> Option<f64> {
        self.probs.get(gram.len() - 1).and_then(|m| m.get(gram)).copied()
    }

    fn backoff_log10(&self, ctx: &[String]) -> f64 {
        if ctx.is_empty() {
            return 0.0;
        }
        self.backoffs
            .get(ctx.len() - 1)
            .and_then(|m| m.get(ctx))
            .copied()
            .unwrap_or(0.0)
    }

    /// ARPA-style backoff query, returning a linear probability.
    pub fn prob(&self, context: &[String], word: &str) -> f64 {
        let ctx_len = context.len().min(self.order - 1);
        let mut ctx = &context[context.len() - ctx_len..];
        loop {
            let mut gram: Gram = ctx.to_vec();
            gram.push(word.to_string());
            if let Some(lp) = self.lookup_log10(&gram) {
                // Accumulate backoff weights of the skipped contexts.
                let mut total = lp;
                let mut outer = ctx.len();
                let full_len = context.len().min(self.order - 1);
                while outer < full_len {
                    outer += 1;
                    let c = &context[context.len() - outer..];
                    total += self.backoff_log10(c);
                }
                return 10f64.powf(total).max(PROB_FLOOR);
            }
            if ctx.is_empty() {
                return PROB_FLOOR;
            }
            ctx = &ctx[1..];
        }
    }

    fn map_word(&self, w: &str) -> String {
        if self.probs[0].contains_key(&vec![w.to_string()]) {
            w.to_string()
        } else {
            UNK_TOKEN.to_string()
        }
    }

    /// Per-event probabilities for a sentence: each token (and EOS, when the
    /// model knows it) conditioned on its padded history.
    pub fn event_probs(&self, sentence: &Sentence) -> Vec<f64> {
        let mut events: Vec<String> = sentence
            .tokens()
            .iter()
            .map(|t| self.map_word(t.normalized()))
            .collect();
        let has_eos = self.probs[0].contains_key(&vec![EOS_TOKEN.to_string()]);
        if self.order >= 2 && has_eos {
            events.push(EOS_TOKEN.to_string());
        }
        let mut ctx: Vec<String> = if self.order >= 2 {
            vec![BOS_TOKEN.to_string(); self.order - 1]
        } else {
            Vec::new()
        };
        let mut out = Vec::with_capacity(events.len());
        for w in events {
            out.push(self.prob(&ctx, &w));
            if self.order >= 2 {
                ctx.remove(0);
                ctx.push(w);
            }
        }
        out
    }
}

/// Fluency `r_f`: geometric-mean per-event probability, in (0,1].
pub fn fluency_score(model: &NgramModel, sentence: &Sentence) -> f64 {
    let probs = model.event_probs(sentence);
    if probs.is_empty() {
        return 0.0;
    }
    let mean_ln = probs.iter().map(|p| p.ln()).sum::<f64>() / probs.len() as f64;
    mean_ln.exp()
}

/// Train an interpolated Kneser-Ney model (absolute discount 0.75).
pub fn train_ngram(corpus: &[Sentence], order: usize) -> Result<NgramModel, ScoreError> {
    if !(1..=5).contains(&order) {
        return Err(ScoreError::OrderOutOfRange { order });
    }
    if order >= 2 && corpus.len() < MIN_LM_CORPUS {
        return Err(ScoreError::CorpusTooSmall { n: corpus.len(), min: MIN_LM_CORPUS });
    }
    if corpus.is_empty() {
        return Err(ScoreError::CorpusTooSmall { n: 0, min: 1 });
    }

    if order == 1 {
        return Ok(train_unigram_mle(corpus));
    }

    // Raw counts per order over padded sentences; windows ending in BOS are
    // never counted (BOS is context-only).
    let mut raw: Vec<HashMap<Gram, u64>> = vec![HashMap::new(); order];
    for s in corpus {
        let mut padded: Vec<String> = vec![BOS_TOKEN.to_string(); order - 1];
        padded.extend(s.tokens().iter().map(|t| t.normalized().to_string()));
        padded.push(EOS_TOKEN.to_string());
        for k in 1..=order {
            for end in k..=padded.len() {
                let gram = &padded[end - k..end];
                if gram[k - 1] == BOS_TOKEN {
                    continue;
                }
                *raw[k - 1].entry(gram.to_vec()).or_insert(0) += 1;
            }
        }
    }

    // Adjusted counts: raw at the top order; continuation counts below,
    // except grams starting with BOS which cannot be left-extended.
    let mut adj: Vec<HashMap<Gram, u64>> = vec![HashMap::new(); order];
    adj[order - 1] = raw[order - 1].clone();
    for k in (1..order).rev() {
        let mut cont: HashMap<Gram, u64> = HashMap::new();
        for g in raw[k].keys() {
            *cont.entry(g[1..].to_vec()).or_insert(0) += 1;
        }
        for (g, &c) in &raw[k - 1] {
            let count = if g[0] == BOS_TOKEN { c } else { *cont.get(g).unwrap_or(&0) };
            adj[k - 1].insert(g.clone(), count);
        }
    }

    let d = KN_DISCOUNT;

    // Unigram distribution over the predicted vocabulary (incl. UNK).
    let mut vocab: Vec<String> = adj[0].keys().map(|g| g[0].clone()).collect();
    if !vocab.contains(&UNK_TOKEN.to_string()) {
        vocab.push(UNK_TOKEN.to_string());
    }
    vocab.sort();
    let v = vocab.len() as f64;
    let total: f64 = adj[0].values().map(|&c| c as f64).sum();
    let n1: f64 = adj[0].values().filter(|&&c| c > 0).count() as f64;
    let uniform_mass = d * n1 / total / v;

    let mut linear: Vec<HashMap<Gram, f64>> = vec![HashMap::new(); order];
    for w in &vocab {
        let g = vec![w.clone()];
        let c = *adj[0].get(&g).unwrap_or(&0) as f64;
        let p = ((c - d).max(0.0)) / total + uniform_mass;
        linear[0].insert(g, p);
    }

    // Higher orders, bottom-up interpolation.
    for k in 2..=order {
        let mut denom: HashMap<Gram, f64> = HashMap::new();
        let mut distinct: HashMap<Gram, f64> = HashMap::new();
        for (g, &c) in &adj[k - 1] {
            let ctx = g[..k - 1].to_vec();
            *denom.entry(ctx.clone()).or_insert(0.0) += c as f64;
            *distinct.entry(ctx).or_insert(0.0) += 1.0;
        }
        let entries: Vec<(Gram, u64)> = adj[k - 1].iter().map(|(g, &c)| (g.clone(), c)).collect();
        for (g, c) in entries {
            let ctx = &g[..k - 1];
            let dn = denom[ctx];
            let lambda = d * distinct[ctx] / dn;
            let lower = linear[k - 2][&g[1..].to_vec()];
            let p = ((c as f64 - d).max(0.0)) / dn + lambda * lower;
            linear[k - 1].insert(g, p);
        }
    }

    build_backoff_tables(order, linear, vocab)
}

/// Convert interpolated per-order distributions into ARPA prob/backoff
/// tables. Backoff weights are derived from the leftover-mass ratio, which
/// keeps every context's next-word distribution normalized.
fn build_backoff_tables(
    order: usize,
    linear: Vec<HashMap<Gram, f64>>,
    vocab: Vec<String>,
) -> Result<NgramModel, ScoreError> {
    let mut probs: Vec<HashMap<Gram, f64>> = linear
        .iter()
        .map(|m| m.iter().map(|(g, p)| (g.clone(), p.log10())).collect())
        .collect();

    // Contexts needing backoff weights: prefixes of higher-order entries.
    let mut backoffs: Vec<HashMap<Gram, f64>> = vec![HashMap::new(); order - 1];
    for k in 1..order {
        let mut grouped: HashMap<Gram, Vec<&Gram>> = HashMap::new();
        for g in linear[k].keys() {
            grouped.entry(g[..k].to_vec()).or_default().push(g);
        }
        for (ctx, entries) in grouped {
            let mut seen_mass = 0.0;
            let mut lower_mass = 0.0;
            for g in entries {
                seen_mass += linear[k][g];
                lower_mass += linear[k - 1][&g[1..].to_vec()];
            }
            let num = (1.0 - seen_mass).max(f64::MIN_POSITIVE);
            let den = (1.0 - lower_mass).max(f64::MIN_POSITIVE);
            // Ensure the context exists as an entry; BOS runs are
            // context-only and get a placeholder probability.
            probs[k - 1]
                .entry(ctx.clone())
                .or_insert(LOG10_PLACEHOLDER);
            backoffs[k - 1].insert(ctx, (num / den).log10());
        }
    }

    Ok(NgramModel { order, probs, backoffs, vocab })
}

fn train_unigram_mle(corpus: &[Sentence]) -> NgramModel {
    let mut counts: HashMap<String, u64> = HashMap::new();
    let mut total = 0u64;
    for s in corpus {
        for t in s.tokens() {
            *counts.entry(t.normalized().to_string()).or_insert(0) += 1;
            total += 1;
        }
    }
    let mut vocab: Vec<String> = counts.keys().cloned().collect();
    vocab.sort();
    let probs0: HashMap<Gram, f64> = counts
        .into_iter()
        .map(|(w, c)| (vec![w], (c as f64 / total as f64).log10()))
        .collect();
    NgramModel { order: 1, probs: vec![probs0], backoffs: vec![], vocab }
}

// ── ARPA serialization ──────────────────────────────────────────────────

impl NgramModel {
    pub fn to_arpa(&self) -> String {
        let mut out = String::from("\\data\\\n");
        for k in 1..=self.order {
            out.push_str(&format!("ngram {}={}\n", k, self.probs[k - 1].len()));
        }
        for k in 1..=self.order {
            out.push_str(&format!("\n\\{k}-grams:\n"));
            let sorted: BTreeMap<&Gram, &f64> = self.probs[k - 1].iter().collect();
            for (gram, lp) in sorted {
                out.push_str(&format!("{lp:.7}\t{}", gram.join(" ")));
                if k < self.order {
                    if let Some(bow) = self.backoffs[k - 1].get(gram) {
                        out.push_str(&format!("\t{bow:.7}"));
                    }
                }
                out.push('\n');
            }
        }
        out.push_str("\n\\end\\\n");
        out
    }

    pub fn save_arpa(&self, path: &Path) -> Result<(), ScoreError> {
        std::fs::write(path, self.to_arpa()).map_err(|e| ScoreError::Io {
            path: path.display().to_string(),
            source: e,
        })
    }

    pub fn load_arpa(path: &Path) -> Result<Self, ScoreError> {
        let text = std::fs::read_to_string(path).map_err(|e| ScoreError::Io {
            path: path.display().to_string(),
            source: e,
        })?;
        Self::parse_arpa(&text, path.display().to_string())
    }

    pub fn parse_arpa(text: &str, origin: String) -> Result<Self, ScoreError> {
        let err = |line: usize, msg: String| ScoreError::Parse {
            path: origin.clone(),
            line,
            msg,
        };
        let mut counts: Vec<usize> = Vec::new();
        let mut probs: Vec<HashMap<Gram, f64>> = Vec::new();
        let mut backoffs: Vec<HashMap<Gram, f64>> = Vec::new();
        let mut section: Option<usize> = None; // current k for \k-grams:
        let mut in_data = false;
        let mut ended = false;

        for (lineno, raw_line) in text.lines().enumerate() {
            let lineno = lineno + 1;
            let line = raw_line.trim();
            if line.is_empty() {
                continue;
            }
            if line == "\\data\\" {
                in_data = true;
                continue;
            }
            if line == "\\end\\" {
                ended = true;
                continue;
            }
            if let Some(rest) = line.strip_prefix('\\') {
                if let Some(k_str) = rest.strip_suffix("-grams:") {
                    let k: usize = k_str
                        .parse()
                        .map_err(|_| err(lineno, format!("bad section header: {line}")))?;
                    if k == 0 || k > counts.len() {
                        return Err(err(lineno, format!("section order {k} out of range")));
                    }
                    section = Some(k);
                    in_data = false;
                    continue;
                }
                return Err(err(lineno, format!("unrecognized directive: {line}")));
            }
            if in_data {
                let rest = line
                    .strip_prefix("ngram ")
                    .ok_or_else(|| err(lineno, format!("bad data line: {line}")))?;
                let (k_str, n_str) = rest
                    .split_once('=')
                    .ok_or_else(|| err(lineno, format!("bad data line: {line}")))?;
                let k: usize = k_str.trim().parse().map_err(|_| err(lineno, "bad order".into()))?;
                let n: usize = n_str.trim().parse().map_err(|_| err(lineno, "bad count".into()))?;
                if k != counts.len() + 1 {
                    return Err(err(lineno, "non-contiguous ngram orders".into()));
                }
                counts.push(n);
                probs.push(HashMap::new());
                if counts.len() > 1 {
                    backoffs.push(HashMap::new());
                }
                continue;
            }
            let k = section.ok_or_else(|| err(lineno, "entry outside any section".into()))?;
            let fields: Vec<&str> = line.split_whitespace().collect();
            if fields.len() < k + 1 || fields.len() > k + 2 {
                return Err(err(lineno, format!("expected {k}+1(+1) fields, got {}", fields.len())));
            }
            let lp: f64 = fields[0]
                .parse()
                .map_err(|_| err(lineno, format!("bad log10 probability: {}", fields[0])))?;
            let gram: Gram = fields[1..1 + k].iter().map(|s| s.to_string()).collect();
            if fields.len() == k + 2 {
                let bow: f64 = fields[k + 1]
                    .parse()
                    .map_err(|_| err(lineno, format!("bad backoff weight: {}", fields[k + 1])))?;
                if k < counts.len() {
                    backoffs[k - 1].insert(gram.clone(), bow);
                } else {
                    return Err(err(lineno, "backoff weight on highest order".into()));
                }
            }
            probs[k - 1].insert(gram, lp);
        }

        if counts.is_empty() {
            return Err(err(0, "missing \\data\\ section".into()));
        }
        if !ended {
            return Err(err(0, "missing \\end\\ marker".into()));
        }
        let order = counts.len();
        let vocab: Vec<String> = {
            let mut v: Vec<String> = probs[0]
                .keys()
                .map(|g| g[0].clone())
                .filter(|w| w != BOS_TOKEN)
                .collect();
            v.sort();
            v
        };
        // backoffs has order-1 maps for order >= 2; none for unigram models.
        backoffs.truncate(order.saturating_sub(1));
        Ok(NgramModel { order, probs, backoffs, vocab })
    }
}
