//! Control predictor: encodes the source and the (hard or soft) output with
//! two single-layer GRUs, concatenates their final states, and classifies
//! the control level through a ReLU hidden layer.

use rand::Rng;

use super::model::{gru_step, GruLayer, WEIGHT_INIT_SCALE};
use super::tape::{NeuralError, NodeId, Tape};
use super::tensor::Tensor;

#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct PredictorDims {
    pub vocab: usize,
    pub emb: usize,
    pub hidden: usize,
    pub classifier_hidden: usize,
    pub num_controls: usize,
}

impl PredictorDims {
    pub fn full(vocab: usize) -> Self {
        PredictorDims { vocab, emb: 300, hidden: 250, classifier_hidden: 128, num_controls: 3 }
    }

    pub fn desk(vocab: usize) -> Self {
        PredictorDims { vocab, emb: 24, hidden: 24, classifier_hidden: 16, num_controls: 3 }
    }

    pub fn tiny(vocab: usize) -> Self {
        PredictorDims { vocab, emb: 6, hidden: 4, classifier_hidden: 5, num_controls: 3 }
    }
}

/// Predictor parameters generic over the carrier, mirroring
/// [`super::model::EncDec`]. Traversal order is the declared field order.
#[derive(Debug, Clone, PartialEq)]
pub struct PredNet<T> {
    pub embedding: T,
    pub gru_x: GruLayer<T>,
    pub gru_y: GruLayer<T>,
    pub w_h: T,
    pub b_h: T,
    pub w_c: T,
    pub b_c: T,
}

impl<T> PredNet<T> {
    pub fn map<U>(&self, f: &mut impl FnMut(&T) -> U) -> PredNet<U> {
        PredNet {
            embedding: f(&self.embedding),
            gru_x: self.gru_x.map(f),
            gru_y: self.gru_y.map(f),
            w_h: f(&self.w_h),
            b_h: f(&self.b_h),
            w_c: f(&self.w_c),
            b_c: f(&self.b_c),
        }
    }

    pub fn for_each(&self, f: &mut impl FnMut(&T)) {
        f(&self.embedding);
        self.gru_x.for_each(f);
        self.gru_y.for_each(f);
        f(&self.w_h);
        f(&self.b_h);
        f(&self.w_c);
        f(&self.b_c);
    }

    pub fn for_each_mut(&mut self, f: &mut impl FnMut(&mut T)) {
        f(&mut self.embedding);
        self.gru_x.for_each_mut(f);
        self.gru_y.for_each_mut(f);
        f(&mut self.w_h);
        f(&mut self.b_h);
        f(&mut self.w_c);
        f(&mut self.b_c);
    }
}

impl<T: Clone> PredNet<T> {
    /// Traversal-ordered flat copy of every field.
    pub fn flat(&self) -> Vec<T> {
        let mut v = Vec::new();
        self.for_each(&mut |t| v.push(t.clone()));
        v
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct PredictorParams {
    pub dims: PredictorDims,
    pub tensors: PredNet<Tensor>,
}

impl PredictorParams {
    pub fn init(dims: PredictorDims, rng: &mut impl Rng) -> Self {
        let s = WEIGHT_INIT_SCALE;
        let tensors = PredNet {
            embedding: Tensor::uniform(dims.vocab, dims.emb, s, rng),
            gru_x: GruLayer::init(dims.emb, dims.hidden, rng),
            gru_y: GruLayer::init(dims.emb, dims.hidden, rng),
            w_h: Tensor::uniform(2 * dims.hidden, dims.classifier_hidden, s, rng),
            b_h: Tensor::zeros(1, dims.classifier_hidden),
            w_c: Tensor::uniform(dims.classifier_hidden, dims.num_controls, s, rng),
            b_c: Tensor::zeros(1, dims.num_controls),
        };
        PredictorParams { dims, tensors }
    }

    pub fn bind(&self, tape: &mut Tape) -> PredNet<NodeId> {
        self.tensors.map(&mut |t: &Tensor| tape.leaf(t.clone()))
    }

    pub fn num_params(&self) -> usize {
        let mut n = 0;
        self.tensors.for_each(&mut |t| n += t.numel());
        n
    }
}

/// The predicted-output side: hard token ids, or per-step distribution rows
/// over the vocabulary (the temperature-relaxed decoder output).
pub enum PredictorInput<'a> {
    Hard(&'a [usize]),
    Soft(&'a [NodeId]),
}

fn run_gru(
    tape: &mut Tape,
    layer: &GruLayer<NodeId>,
    inputs: &[NodeId],
    hidden: usize,
) -> Result<NodeId, NeuralError> {
    let mut h = tape.leaf(Tensor::zeros(1, hidden));
    for &x in inputs {
        h = gru_step(tape, layer, x, h)?;
    }
    Ok(h)
}

/// Control logits for a (source, output) pair. Soft outputs flow through an
/// expected-embedding lookup so gradients reach the decoder distributions.
pub fn predict_logits(
    tape: &mut Tape,
    nodes: &PredNet<NodeId>,
    dims: &PredictorDims,
    x_ids: &[usize],
    y: PredictorInput<'_>,
) -> Result<NodeId, NeuralError> {
    if x_ids.is_empty() {
        return Err(NeuralError::EmptyInput);
    }
    let x_emb: Vec<NodeId> = x_ids
        .iter()
        .map(|&id| tape.select_row(nodes.embedding, id))
        .collect::<Result<_, _>>()?;
    let y_emb: Vec<NodeId> = match y {
        PredictorInput::Hard(ids) => {
            if ids.is_empty() {
                return Err(NeuralError::EmptyInput);
            }
            ids.iter()
                .map(|&id| tape.select_row(nodes.embedding, id))
                .collect::<Result<_, _>>()?
        }
        PredictorInput::Soft(dists) => {
            if dists.is_empty() {
                return Err(NeuralError::EmptyInput);
            }
            dists
                .iter()
                .map(|&d| tape.matmul(d, nodes.embedding))
                .collect::<Result<_, _>>()?
        }
    };
    let h_x = run_gru(tape, &nodes.gru_x, &x_emb, dims.hidden)?;
    let h_y = run_gru(tape, &nodes.gru_y, &y_emb, dims.hidden)?;
    let h = tape.concat_cols(h_x, h_y)?;
    let pre = tape.matmul(h, nodes.w_h)?;
    let pre_b = tape.add_row(pre, nodes.b_h)?;
    let h_f = tape.relu(pre_b);
    let out = tape.matmul(h_f, nodes.w_c)?;
    tape.add_row(out, nodes.b_c)
}

/// Hard-path classification without gradient bookkeeping; returns the
/// 1-based control level.
pub fn classify(
    params: &PredictorParams,
    x_ids: &[usize],
    y_ids: &[usize],
) -> Result<usize, NeuralError> {
    let mut tape = Tape::new();
    let nodes = params.bind(&mut tape);
    let logits = predict_logits(&mut tape, &nodes, &params.dims, x_ids, PredictorInput::Hard(y_ids))?;
    Ok(tape.value(logits).argmax_row(0) + 1)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn tiny(seed: u64) -> PredictorParams {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        PredictorParams::init(PredictorDims::tiny(10), &mut rng)
    }

    #[test]
    fn logits_shape_and_determinism() {
        let params = tiny(0);
        let run = || {
            let mut tape = Tape::new();
            let nodes = params.bind(&mut tape);
            let l = predict_logits(&mut tape, &nodes, &params.dims, &[4, 5], PredictorInput::Hard(&[6, 7, 8]))
                .unwrap();
            tape.value(l).clone()
        };
        let a = run();
        let b = run();
        assert_eq!((a.rows, a.cols), (1, 3));
        assert_eq!(a, b);
    }

    #[test]
    fn soft_one_hot_matches_hard() {
        let params = tiny(1);
        let dims = params.dims;
        let y_ids = [6usize, 7];

        let mut tape = Tape::new();
        let nodes = params.bind(&mut tape);
        let hard =
            predict_logits(&mut tape, &nodes, &dims, &[4, 5], PredictorInput::Hard(&y_ids)).unwrap();
        let hard_v = tape.value(hard).clone();

        let mut tape = Tape::new();
        let nodes = params.bind(&mut tape);
        let dists: Vec<NodeId> = y_ids
            .iter()
            .map(|&id| {
                let mut t = Tensor::zeros(1, dims.vocab);
                t.data[id] = 1.0;
                tape.leaf(t)
            })
            .collect();
        let soft =
            predict_logits(&mut tape, &nodes, &dims, &[4, 5], PredictorInput::Soft(&dists)).unwrap();
        for (a, b) in hard_v.data.iter().zip(&tape.value(soft).data) {
            assert!((a - b).abs() < 1e-12);
        }
    }

    #[test]
    fn empty_inputs_rejected() {
        let params = tiny(2);
        assert!(matches!(classify(&params, &[], &[4]), Err(NeuralError::EmptyInput)));
        assert!(matches!(classify(&params, &[4], &[]), Err(NeuralError::EmptyInput)));
    }

    #[test]
    fn classify_in_range() {
        let params = tiny(3);
        let c = classify(&params, &[4, 5, 6], &[7, 8]).unwrap();
        assert!((1..=3).contains(&c));
    }
}
