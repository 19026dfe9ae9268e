//! Control-conditioned encoder-attend-decoder: a 2-layer bidirectional GRU
//! encoder, additive attention, and a GRU decoder whose input embeds the
//! previous token concatenated with a learned control embedding.

use rand::Rng;

use super::tape::{NeuralError, NodeId, Tape};
use super::tensor::Tensor;

pub const WEIGHT_INIT_SCALE: f64 = 0.08;

#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct ModelDims {
    pub vocab: usize,
    pub emb: usize,
    /// Encoder hidden size per direction.
    pub enc_hidden: usize,
    pub dec_hidden: usize,
    pub enc_layers: usize,
    pub dec_layers: usize,
    pub ctrl_dim: usize,
    pub attn_dim: usize,
    pub num_controls: usize,
}

impl ModelDims {
    /// Hyperparameters at full scale: 300-dim shared embeddings, 2×250
    /// bidirectional encoder, 2×500 decoder, 16-dim control embedding.
    pub fn full(vocab: usize) -> Self {
        ModelDims {
            vocab,
            emb: 300,
            enc_hidden: 250,
            dec_hidden: 500,
            enc_layers: 2,
            dec_layers: 2,
            ctrl_dim: 16,
            attn_dim: 128,
            num_controls: 3,
        }
    }

    /// Desk-scale dimensions for toy corpora and tests.
    pub fn desk(vocab: usize) -> Self {
        ModelDims {
            vocab,
            emb: 24,
            enc_hidden: 24,
            dec_hidden: 48,
            enc_layers: 2,
            dec_layers: 2,
            ctrl_dim: 8,
            attn_dim: 16,
            num_controls: 3,
        }
    }

    /// Tiny dimensions for finite-difference gradient verification.
    pub fn tiny(vocab: usize) -> Self {
        ModelDims {
            vocab,
            emb: 6,
            enc_hidden: 4,
            dec_hidden: 8,
            enc_layers: 2,
            dec_layers: 2,
            ctrl_dim: 4,
            attn_dim: 5,
            num_controls: 3,
        }
    }
}

/// One GRU layer's parameters (reset r, update z, candidate n gates).
#[derive(Debug, Clone, PartialEq)]
pub struct GruLayer<T> {
    pub wr: T,
    pub ur: T,
    pub br: T,
    pub wz: T,
    pub uz: T,
    pub bz: T,
    pub wh: T,
    pub uh: T,
    pub bh: T,
}

impl<T> GruLayer<T> {
    pub fn map<U>(&self, f: &mut impl FnMut(&T) -> U) -> GruLayer<U> {
        GruLayer {
            wr: f(&self.wr),
            ur: f(&self.ur),
            br: f(&self.br),
            wz: f(&self.wz),
            uz: f(&self.uz),
            bz: f(&self.bz),
            wh: f(&self.wh),
            uh: f(&self.uh),
            bh: f(&self.bh),
        }
    }

    pub fn for_each(&self, f: &mut impl FnMut(&T)) {
        for t in [
            &self.wr, &self.ur, &self.br, &self.wz, &self.uz, &self.bz, &self.wh, &self.uh,
            &self.bh,
        ] {
            f(t);
        }
    }

    pub fn for_each_mut(&mut self, f: &mut impl FnMut(&mut T)) {
        for t in [
            &mut self.wr,
            &mut self.ur,
            &mut self.br,
            &mut self.wz,
            &mut self.uz,
            &mut self.bz,
            &mut self.wh,
            &mut self.uh,
            &mut self.bh,
        ] {
            f(t);
        }
    }
}

impl GruLayer<Tensor> {
    pub fn init(input: usize, hidden: usize, rng: &mut impl Rng) -> Self {
        let s = WEIGHT_INIT_SCALE;
        GruLayer {
            wr: Tensor::uniform(input, hidden, s, rng),
            ur: Tensor::uniform(hidden, hidden, s, rng),
            br: Tensor::zeros(1, hidden),
            wz: Tensor::uniform(input, hidden, s, rng),
            uz: Tensor::uniform(hidden, hidden, s, rng),
            bz: Tensor::zeros(1, hidden),
            wh: Tensor::uniform(input, hidden, s, rng),
            uh: Tensor::uniform(hidden, hidden, s, rng),
            bh: Tensor::zeros(1, hidden),
        }
    }
}

/// Every trainable tensor of the encoder-decoder, generic over the carrier
/// so the same structure holds parameters (`Tensor`) or tape bindings
/// (`NodeId`). Traversal order is the declared field order; the checkpoint
/// format and the optimizer both rely on it.
#[derive(Debug, Clone, PartialEq)]
pub struct EncDec<T> {
    pub embedding: T,
    pub enc_fwd: Vec<GruLayer<T>>,
    pub enc_bwd: Vec<GruLayer<T>>,
    pub dec: Vec<GruLayer<T>>,
    pub ctrl_emb: T,
    pub attn_w1: T,
    pub attn_w2: T,
    pub attn_v: T,
    pub init_w: Vec<T>,
    pub init_b: Vec<T>,
    pub out_w: T,
    pub out_b: T,
}

impl<T> EncDec<T> {
    pub fn map<U>(&self, f: &mut impl FnMut(&T) -> U) -> EncDec<U> {
        EncDec {
            embedding: f(&self.embedding),
            enc_fwd: self.enc_fwd.iter().map(|l| l.map(f)).collect(),
            enc_bwd: self.enc_bwd.iter().map(|l| l.map(f)).collect(),
            dec: self.dec.iter().map(|l| l.map(f)).collect(),
            ctrl_emb: f(&self.ctrl_emb),
            attn_w1: f(&self.attn_w1),
            attn_w2: f(&self.attn_w2),
            attn_v: f(&self.attn_v),
            init_w: self.init_w.iter().map(&mut *f).collect(),
            init_b: self.init_b.iter().map(&mut *f).collect(),
            out_w: f(&self.out_w),
            out_b: f(&self.out_b),
        }
    }

    pub fn for_each(&self, f: &mut impl FnMut(&T)) {
        f(&self.embedding);
        for l in &self.enc_fwd {
            l.for_each(f);
        }
        for l in &self.enc_bwd {
            l.for_each(f);
        }
        for l in &self.dec {
            l.for_each(f);
        }
        f(&self.ctrl_emb);
        f(&self.attn_w1);
        f(&self.attn_w2);
        f(&self.attn_v);
        for t in &self.init_w {
            f(t);
        }
        for t in &self.init_b {
            f(t);
        }
        f(&self.out_w);
        f(&self.out_b);
    }

    pub fn for_each_mut(&mut self, f: &mut impl FnMut(&mut T)) {
        f(&mut self.embedding);
        for l in &mut self.enc_fwd {
            l.for_each_mut(f);
        }
        for l in &mut self.enc_bwd {
            l.for_each_mut(f);
        }
        for l in &mut self.dec {
            l.for_each_mut(f);
        }
        f(&mut self.ctrl_emb);
        f(&mut self.attn_w1);
        f(&mut self.attn_w2);
        f(&mut self.attn_v);
        for t in &mut self.init_w {
            f(t);
        }
        for t in &mut self.init_b {
            f(t);
        }
        f(&mut self.out_w);
        f(&mut self.out_b);
    }

}

impl<T: Clone> EncDec<T> {
    /// Traversal-ordered flat copy of every field.
    pub fn flat(&self) -> Vec<T> {
        let mut v = Vec::new();
        self.for_each(&mut |t| v.push(t.clone()));
        v
    }
}

/// Encoder-decoder parameters plus their dimensions.
#[derive(Debug, Clone, PartialEq)]
pub struct ModelParams {
    pub dims: ModelDims,
    pub tensors: EncDec<Tensor>,
}

impl ModelParams {
    pub fn init(dims: ModelDims, rng: &mut impl Rng) -> Self {
        let s = WEIGHT_INIT_SCALE;
        let mut enc_fwd = Vec::new();
        let mut enc_bwd = Vec::new();
        for l in 0..dims.enc_layers {
            let input = if l == 0 { dims.emb } else { 2 * dims.enc_hidden };
            enc_fwd.push(GruLayer::init(input, dims.enc_hidden, rng));
            enc_bwd.push(GruLayer::init(input, dims.enc_hidden, rng));
        }
        let mut dec = Vec::new();
        for l in 0..dims.dec_layers {
            let input = if l == 0 { dims.emb + dims.ctrl_dim } else { dims.dec_hidden };
            dec.push(GruLayer::init(input, dims.dec_hidden, rng));
        }
        let mut init_w = Vec::new();
        let mut init_b = Vec::new();
        for _ in 0..dims.dec_layers {
            init_w.push(Tensor::uniform(2 * dims.enc_hidden, dims.dec_hidden, s, rng));
            init_b.push(Tensor::zeros(1, dims.dec_hidden));
        }
        let tensors = EncDec {
            embedding: Tensor::uniform(dims.vocab, dims.emb, s, rng),
            enc_fwd,
            enc_bwd,
            dec,
            ctrl_emb: Tensor::uniform(dims.num_controls, dims.ctrl_dim, s, rng),
            attn_w1: Tensor::uniform(2 * dims.enc_hidden, dims.attn_dim, s, rng),
            attn_w2: Tensor::uniform(dims.dec_hidden, dims.attn_dim, s, rng),
            attn_v: Tensor::uniform(dims.attn_dim, 1, s, rng),
            init_w,
            init_b,
            out_w: Tensor::uniform(dims.dec_hidden + 2 * dims.enc_hidden, dims.vocab, s, rng),
            out_b: Tensor::zeros(1, dims.vocab),
        };
        ModelParams { dims, tensors }
    }

    /// Register every parameter on a tape as differentiable leaves.
    pub fn bind(&self, tape: &mut Tape) -> EncDec<NodeId> {
        self.tensors.map(&mut |t: &Tensor| tape.leaf(t.clone()))
    }

    pub fn num_params(&self) -> usize {
        let mut n = 0;
        self.tensors.for_each(&mut |t| n += t.numel());
        n
    }
}

/// One GRU step: `h' = z ⊙ h + (1−z) ⊙ n`, so saturating the update gate to
/// 1 holds the previous state.
pub fn gru_step(
    tape: &mut Tape,
    layer: &GruLayer<NodeId>,
    x: NodeId,
    h_prev: NodeId,
) -> Result<NodeId, NeuralError> {
    let xr = tape.matmul(x, layer.wr)?;
    let hr = tape.matmul(h_prev, layer.ur)?;
    let sum_r = tape.add(xr, hr)?;
    let pre_r = tape.add_row(sum_r, layer.br)?;
    let r = tape.sigmoid(pre_r);

    let xz = tape.matmul(x, layer.wz)?;
    let hz = tape.matmul(h_prev, layer.uz)?;
    let sum_z = tape.add(xz, hz)?;
    let pre_z = tape.add_row(sum_z, layer.bz)?;
    let z = tape.sigmoid(pre_z);

    let xh = tape.matmul(x, layer.wh)?;
    let rh = tape.mul(r, h_prev)?;
    let hh = tape.matmul(rh, layer.uh)?;
    let sum_h = tape.add(xh, hh)?;
    let pre_h = tape.add_row(sum_h, layer.bh)?;
    let n = tape.tanh(pre_h);

    let zh = tape.mul(z, h_prev)?;
    let one_minus_z = tape.affine(z, -1.0, 1.0);
    let zn = tape.mul(one_minus_z, n)?;
    tape.add(zh, zn)
}

pub struct Encoded {
    /// N×(2·enc_hidden) matrix of per-position states.
    pub h_matrix: NodeId,
    /// Learned initial decoder state per layer.
    pub init_states: Vec<NodeId>,
    pub len: usize,
}

/// Bidirectional multi-layer encoding of a token id sequence.
pub fn encode(
    tape: &mut Tape,
    nodes: &EncDec<NodeId>,
    dims: &ModelDims,
    x_ids: &[usize],
) -> Result<Encoded, NeuralError> {
    if x_ids.is_empty() {
        return Err(NeuralError::EmptyInput);
    }
    let n = x_ids.len();
    let mut layer_in: Vec<NodeId> = x_ids
        .iter()
        .map(|&id| tape.select_row(nodes.embedding, id))
        .collect::<Result<_, _>>()?;

    let mut final_fwd = None;
    let mut final_bwd = None;
    for l in 0..dims.enc_layers {
        let mut fwd = Vec::with_capacity(n);
        let mut h = tape.leaf(Tensor::zeros(1, dims.enc_hidden));
        for &x in layer_in.iter().take(n) {
            h = gru_step(tape, &nodes.enc_fwd[l], x, h)?;
            fwd.push(h);
        }
        let mut bwd = vec![NodeId(0); n];
        let mut hb = tape.leaf(Tensor::zeros(1, dims.enc_hidden));
        for t in (0..n).rev() {
            hb = gru_step(tape, &nodes.enc_bwd[l], layer_in[t], hb)?;
            bwd[t] = hb;
        }
        layer_in = (0..n)
            .map(|t| tape.concat_cols(fwd[t], bwd[t]))
            .collect::<Result<_, _>>()?;
        final_fwd = Some(fwd[n - 1]);
        final_bwd = Some(bwd[0]);
    }

    let h_matrix = tape.concat_rows(&layer_in)?;
    let summary = tape.concat_cols(final_fwd.unwrap(), final_bwd.unwrap())?;
    let mut init_states = Vec::with_capacity(dims.dec_layers);
    for l in 0..dims.dec_layers {
        let proj = tape.matmul(summary, nodes.init_w[l])?;
        let pre = tape.add_row(proj, nodes.init_b[l])?;
        init_states.push(tape.tanh(pre));
    }
    Ok(Encoded { h_matrix, init_states, len: n })
}

/// Additive attention: `score_j = vᵀ·tanh(W1·H_j + W2·s)`; returns the
/// softmax-weighted context vector.
pub fn attend(
    tape: &mut Tape,
    nodes: &EncDec<NodeId>,
    h_matrix: NodeId,
    state: NodeId,
) -> Result<NodeId, NeuralError> {
    let hw = tape.matmul(h_matrix, nodes.attn_w1)?;
    let sw = tape.matmul(state, nodes.attn_w2)?;
    let pre = tape.add_row(hw, sw)?;
    let t = tape.tanh(pre);
    let scores = tape.matmul(t, nodes.attn_v)?;
    let scores_row = tape.transpose(scores);
    let weights = tape.softmax_rows(scores_row);
    tape.matmul(weights, h_matrix)
}

pub fn valid_control(c: usize, dims: &ModelDims) -> Result<usize, NeuralError> {
    if c < 1 || c > dims.num_controls {
        return Err(NeuralError::InvalidControl { value: c as i64 });
    }
    Ok(c - 1)
}

/// One decoder step. `y_prev` is either a hard token id or a soft
/// distribution row (expected embedding). Returns the output logits and the
/// updated per-layer states.
pub fn decode_step(
    tape: &mut Tape,
    nodes: &EncDec<NodeId>,
    dims: &ModelDims,
    y_prev: DecoderInput,
    control: usize,
    states: &mut [NodeId],
    h_matrix: NodeId,
) -> Result<NodeId, NeuralError> {
    let c_idx = valid_control(control, dims)?;
    let emb = match y_prev {
        DecoderInput::Hard(id) => tape.select_row(nodes.embedding, id)?,
        DecoderInput::Soft(dist) => tape.matmul(dist, nodes.embedding)?,
    };
    let ctrl = tape.select_row(nodes.ctrl_emb, c_idx)?;
    let mut x = tape.concat_cols(emb, ctrl)?;
    for (l, state) in states.iter_mut().enumerate() {
        *state = gru_step(tape, &nodes.dec[l], x, *state)?;
        x = *state;
    }
    let s_top = *states.last().expect("decoder has layers");
    let z = attend(tape, nodes, h_matrix, s_top)?;
    let feat = tape.concat_cols(s_top, z)?;
    let proj = tape.matmul(feat, nodes.out_w)?;
    tape.add_row(proj, nodes.out_b)
}

#[derive(Clone, Copy)]
pub enum DecoderInput {
    Hard(usize),
    Soft(NodeId),
}

/// Teacher-forced pass: decoder inputs are BOS followed by the gold target
/// prefix; returns one logits node per target position.
pub fn teacher_forced_logits(
    tape: &mut Tape,
    nodes: &EncDec<NodeId>,
    dims: &ModelDims,
    x_ids: &[usize],
    targets: &[usize],
    control: usize,
) -> Result<Vec<NodeId>, NeuralError> {
    valid_control(control, dims)?;
    let enc = encode(tape, nodes, dims, x_ids)?;
    let mut states = enc.init_states.clone();
    let mut logits = Vec::with_capacity(targets.len());
    let mut prev = crate::textcore::BOS;
    for &t in targets {
        let l = decode_step(
            tape,
            nodes,
            dims,
            DecoderInput::Hard(prev),
            control,
            &mut states,
            enc.h_matrix,
        )?;
        logits.push(l);
        prev = t;
    }
    Ok(logits)
}

/// Greedy decoding: argmax each step until EOS or `max_len`. Pure function
/// of (params, input, control).
pub fn generate(
    params: &ModelParams,
    x_ids: &[usize],
    control: usize,
    max_len: usize,
) -> Result<Vec<usize>, NeuralError> {
    let mut tape = Tape::new();
    let nodes = params.bind(&mut tape);
    let dims = &params.dims;
    valid_control(control, dims)?;
    let enc = encode(&mut tape, &nodes, dims, x_ids)?;
    let mut states = enc.init_states.clone();
    let mut out = Vec::new();
    let mut prev = crate::textcore::BOS;
    for _ in 0..max_len {
        let logits = decode_step(
            &mut tape,
            &nodes,
            dims,
            DecoderInput::Hard(prev),
            control,
            &mut states,
            enc.h_matrix,
        )?;
        let next = tape.value(logits).argmax_row(0);
        if next == crate::textcore::EOS {
            break;
        }
        out.push(next);
        prev = next;
    }
    Ok(out)
}

/// Mean token-level cross entropy of temperature-scaled logits against hard
/// targets.
pub fn sequence_loss(
    tape: &mut Tape,
    logits: &[NodeId],
    targets: &[usize],
    tau: f64,
) -> Result<NodeId, NeuralError> {
    if tau <= 0.0 {
        return Err(NeuralError::BadTemperature { tau });
    }
    assert_eq!(logits.len(), targets.len());
    let terms: Vec<NodeId> = logits
        .iter()
        .zip(targets)
        .map(|(&l, &t)| tape.cross_entropy_logits(l, t, 1.0 / tau))
        .collect::<Result<_, _>>()?;
    let sum = tape.add_n(&terms);
    Ok(tape.affine(sum, 1.0 / terms.len() as f64, 0.0))
}
