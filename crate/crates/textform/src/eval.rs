//! Evaluation harness: per-control score averages, control-agreement
//! accuracy, and corpus-level BLEU.

use serde::Serialize;
use std::collections::BTreeMap;
use std::collections::HashMap;

use crate::scorers::{ScoreError, ScoringContext};
use crate::textcore::Sentence;
use crate::trainloop::{determine_control, ControlLevel, TrainError};

use thiserror::Error;

#[derive(Debug, Error)]
pub enum EvalError {
    #[error("misaligned corpora: {candidates} candidates vs {references} references")]
    Misaligned { candidates: usize, references: usize },
    #[error("empty evaluation set")]
    Empty,
    #[error(transparent)]
    Score(#[from] ScoreError),
    #[error(transparent)]
    Train(#[from] TrainError),
}

#[derive(Debug, Clone, Serialize)]
pub struct ControlReport {
    pub control: usize,
    pub mean_r_d: f64,
    pub mean_r_s: f64,
    pub mean_r_f: f64,
    /// Percentage of instances whose measured control matches the intended one.
    pub agreement_pct: f64,
    pub samples: usize,
}

#[derive(Debug, Clone, Serialize)]
pub struct EvalReport {
    pub input_mean_r_d: f64,
    pub per_control: Vec<ControlReport>,
    pub bleu: Option<f64>,
    pub samples: usize,
}

/// Score transformed outputs per control against their inputs. Agreement is
/// computed with the same ratio rule that labels training triples. BLEU is
/// reported only when references are supplied, against the highest control's
/// outputs.
pub fn evaluate_outputs(
    inputs: &[Sentence],
    outputs: &BTreeMap<usize, Vec<Sentence>>,
    ctx: &ScoringContext,
    zeta1: f64,
    zeta2: f64,
    references: Option<&[Sentence]>,
) -> Result<EvalReport, EvalError> {
    if inputs.is_empty() || outputs.is_empty() {
        return Err(EvalError::Empty);
    }
    for (control, outs) in outputs {
        if outs.len() != inputs.len() {
            log::error!("control {control}: {} outputs for {} inputs", outs.len(), inputs.len());
            return Err(EvalError::Misaligned {
                candidates: outs.len(),
                references: inputs.len(),
            });
        }
    }

    let input_mean_r_d = inputs
        .iter()
        .map(|x| ctx.readability(x))
        .sum::<Result<f64, _>>()?
        / inputs.len() as f64;

    let mut per_control = Vec::new();
    for (&control, outs) in outputs {
        let intended = ControlLevel::from_value(control).map_err(TrainError::from)?;
        let mut sums = (0.0, 0.0, 0.0);
        let mut agree = 0usize;
        for (x, y) in inputs.iter().zip(outs) {
            let b = ctx.composite(x, y)?;
            sums.0 += b.r_d;
            sums.1 += b.r_s;
            sums.2 += b.r_f;
            if determine_control(ctx, x, y, zeta1, zeta2)? == intended {
                agree += 1;
            }
        }
        let n = inputs.len() as f64;
        per_control.push(ControlReport {
            control,
            mean_r_d: sums.0 / n,
            mean_r_s: sums.1 / n,
            mean_r_f: sums.2 / n,
            agreement_pct: 100.0 * agree as f64 / n,
            samples: inputs.len(),
        });
    }

    let bleu = match references {
        Some(refs) => {
            let top = outputs.keys().max().copied().expect("outputs non-empty");
            Some(corpus_bleu(&outputs[&top], refs)?)
        }
        None => None,
    };

    Ok(EvalReport { input_mean_r_d, per_control, bleu, samples: inputs.len() })
}

const BLEU_MAX_N: usize = 4;
const BLEU_EPSILON: f64 = 1e-9;

fn ngram_counts(tokens: &[&str], n: usize) -> HashMap<Vec<String>, usize> {
    let mut counts = HashMap::new();
    if tokens.len() >= n {
        for w in tokens.windows(n) {
            *counts
                .entry(w.iter().map(|s| s.to_string()).collect::<Vec<_>>())
                .or_insert(0) += 1;
        }
    }
    counts
}

/// Corpus-level BLEU as a percentage: clipped n-gram precisions to order 4,
/// geometric mean, brevity penalty. A zero unigram precision yields exactly
/// 0.0; zero higher-order precisions are floored at 1e-9 so short
/// diagnostics stay finite.
pub fn corpus_bleu(candidates: &[Sentence], references: &[Sentence]) -> Result<f64, EvalError> {
    if candidates.len() != references.len() {
        return Err(EvalError::Misaligned {
            candidates: candidates.len(),
            references: references.len(),
        });
    }
    if candidates.is_empty() {
        return Err(EvalError::Empty);
    }
    let mut matched = [0usize; BLEU_MAX_N];
    let mut total = [0usize; BLEU_MAX_N];
    let mut cand_len = 0usize;
    let mut ref_len = 0usize;
    for (c, r) in candidates.iter().zip(references) {
        let ct = c.normalized();
        let rt = r.normalized();
        cand_len += ct.len();
        ref_len += rt.len();
        for (n, (m, t)) in matched.iter_mut().zip(total.iter_mut()).enumerate() {
            let order = n + 1;
            let cn = ngram_counts(&ct, order);
            let rn = ngram_counts(&rt, order);
            for (gram, count) in cn {
                *m += count.min(rn.get(&gram).copied().unwrap_or(0));
            }
            *t += ct.len().saturating_sub(order - 1);
        }
    }
    let mut log_sum = 0.0;
    for n in 0..BLEU_MAX_N {
        let p = if total[n] == 0 { 0.0 } else { matched[n] as f64 / total[n] as f64 };
        let p = if p == 0.0 {
            if n == 0 {
                return Ok(0.0);
            }
            BLEU_EPSILON
        } else {
            p
        };
        log_sum += p.ln();
    }
    let bp = if cand_len > ref_len {
        1.0
    } else {
        (1.0 - ref_len as f64 / cand_len as f64).exp()
    };
    Ok(100.0 * bp * (log_sum / BLEU_MAX_N as f64).exp())
}
