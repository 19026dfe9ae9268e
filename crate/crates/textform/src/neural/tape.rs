//! Reverse-mode automatic differentiation over a flat tape of tensors.
//!
//! Each operation records its forward value plus a backward closure that
//! scatters the output gradient into its parents. A fresh tape is built per
//! forward pass; `backward` walks the tape in reverse from a scalar loss.

use super::tensor::Tensor;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum NeuralError {
    #[error("shape mismatch in {op}: {details}")]
    ShapeMismatch { op: &'static str, details: String },
    #[error("temperature must be positive, got {tau}")]
    BadTemperature { tau: f64 },
    #[error("invalid control level {value}, expected 1..=3")]
    InvalidControl { value: i64 },
    #[error("empty input sequence")]
    EmptyInput,
    #[error("lambda {lambda} outside [0,1]")]
    BadLambda { lambda: f64 },
    #[error("checkpoint error: {msg}")]
    Checkpoint { msg: String },
}

fn shape_err(op: &'static str, a: &Tensor, b: Option<&Tensor>) -> NeuralError {
    let details = match b {
        Some(b) => format!("({}x{}) vs ({}x{})", a.rows, a.cols, b.rows, b.cols),
        None => format!("({}x{})", a.rows, a.cols),
    };
    NeuralError::ShapeMismatch { op, details }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct NodeId(pub(crate) usize);

impl NodeId {
    /// Position of this node on its tape; indexes the gradient vector
    /// returned by [`Tape::backward`].
    pub fn index(self) -> usize {
        self.0
    }
}

type BackFn = Box<dyn Fn(&[Tensor], &Tensor, &mut [Tensor])>;

#[derive(Default)]
pub struct Tape {
    values: Vec<Tensor>,
    backs: Vec<Option<BackFn>>,
}

impl Tape {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn value(&self, id: NodeId) -> &Tensor {
        &self.values[id.0]
    }

    fn push(&mut self, value: Tensor, back: Option<BackFn>) -> NodeId {
        self.values.push(value);
        self.backs.push(back);
        NodeId(self.values.len() - 1)
    }

    /// A differentiable input (parameters); gradients accumulate here.
    pub fn leaf(&mut self, value: Tensor) -> NodeId {
        self.push(value, None)
    }

    /// Run reverse-mode accumulation from a scalar loss node and return the
    /// gradient of every node on the tape.
    pub fn backward(&self, loss: NodeId) -> Vec<Tensor> {
        assert!(self.values[loss.0].is_scalar(), "loss must be scalar");
        let mut grads: Vec<Tensor> = self.values.iter().map(Tensor::zeros_like).collect();
        grads[loss.0].data[0] = 1.0;
        for i in (0..=loss.0).rev() {
            if let Some(back) = &self.backs[i] {
                let g = grads[i].clone();
                if g.data.iter().all(|v| *v == 0.0) {
                    continue;
                }
                back(&self.values, &g, &mut grads);
            }
        }
        grads
    }

    // ── primitives ─────────────────────────────────────────────────────

    pub fn matmul(&mut self, a: NodeId, b: NodeId) -> Result<NodeId, NeuralError> {
        let (va, vb) = (&self.values[a.0], &self.values[b.0]);
        if va.cols != vb.rows {
            return Err(shape_err("matmul", va, Some(vb)));
        }
        let (m, k, n) = (va.rows, va.cols, vb.cols);
        let mut out = Tensor::zeros(m, n);
        for i in 0..m {
            for p in 0..k {
                let x = va.at(i, p);
                if x == 0.0 {
                    continue;
                }
                let brow = vb.row(p);
                let orow = &mut out.data[i * n..(i + 1) * n];
                for j in 0..n {
                    orow[j] += x * brow[j];
                }
            }
        }
        let (ai, bi) = (a.0, b.0);
        Ok(self.push(
            out,
            Some(Box::new(move |vals, g, grads| {
                let (va, vb) = (&vals[ai], &vals[bi]);
                let (m, k, n) = (va.rows, va.cols, vb.cols);
                // dA = g · Bᵀ
                {
                    let ga = &mut grads[ai];
                    for i in 0..m {
                        for p in 0..k {
                            let mut acc = 0.0;
                            let grow = &g.data[i * n..(i + 1) * n];
                            let brow = vb.row(p);
                            for j in 0..n {
                                acc += grow[j] * brow[j];
                            }
                            *ga.at_mut(i, p) += acc;
                        }
                    }
                }
                // dB = Aᵀ · g
                {
                    let gb = &mut grads[bi];
                    for p in 0..k {
                        for i in 0..m {
                            let x = va.at(i, p);
                            if x == 0.0 {
                                continue;
                            }
                            let grow = &g.data[i * n..(i + 1) * n];
                            let brow = &mut gb.data[p * n..(p + 1) * n];
                            for j in 0..n {
                                brow[j] += x * grow[j];
                            }
                        }
                    }
                }
            })),
        ))
    }

    pub fn add(&mut self, a: NodeId, b: NodeId) -> Result<NodeId, NeuralError> {
        let (va, vb) = (&self.values[a.0], &self.values[b.0]);
        if va.rows != vb.rows || va.cols != vb.cols {
            return Err(shape_err("add", va, Some(vb)));
        }
        let mut out = va.clone();
        for (o, x) in out.data.iter_mut().zip(&vb.data) {
            *o += x;
        }
        let (ai, bi) = (a.0, b.0);
        Ok(self.push(
            out,
            Some(Box::new(move |_, g, grads| {
                for (ga, gx) in grads[ai].data.iter_mut().zip(&g.data) {
                    *ga += gx;
                }
                for (gb, gx) in grads[bi].data.iter_mut().zip(&g.data) {
                    *gb += gx;
                }
            })),
        ))
    }

    /// Matrix plus row vector, broadcast over rows.
    pub fn add_row(&mut self, a: NodeId, b: NodeId) -> Result<NodeId, NeuralError> {
        let (va, vb) = (&self.values[a.0], &self.values[b.0]);
        if vb.rows != 1 || va.cols != vb.cols {
            return Err(shape_err("add_row", va, Some(vb)));
        }
        let mut out = va.clone();
        for i in 0..out.rows {
            let row = &mut out.data[i * out.cols..(i + 1) * out.cols];
            for (o, x) in row.iter_mut().zip(&vb.data) {
                *o += x;
            }
        }
        let (ai, bi) = (a.0, b.0);
        Ok(self.push(
            out,
            Some(Box::new(move |vals, g, grads| {
                for (ga, gx) in grads[ai].data.iter_mut().zip(&g.data) {
                    *ga += gx;
                }
                let cols = vals[bi].cols;
                let gb = &mut grads[bi];
                for i in 0..g.rows {
                    for j in 0..cols {
                        gb.data[j] += g.at(i, j);
                    }
                }
            })),
        ))
    }

    pub fn mul(&mut self, a: NodeId, b: NodeId) -> Result<NodeId, NeuralError> {
        let (va, vb) = (&self.values[a.0], &self.values[b.0]);
        if va.rows != vb.rows || va.cols != vb.cols {
            return Err(shape_err("mul", va, Some(vb)));
        }
        let mut out = va.clone();
        for (o, x) in out.data.iter_mut().zip(&vb.data) {
            *o *= x;
        }
        let (ai, bi) = (a.0, b.0);
        Ok(self.push(
            out,
            Some(Box::new(move |vals, g, grads| {
                for idx in 0..g.data.len() {
                    let gx = g.data[idx];
                    grads[ai].data[idx] += gx * vals[bi].data[idx];
                    grads[bi].data[idx] += gx * vals[ai].data[idx];
                }
            })),
        ))
    }

    /// Elementwise affine map `scale * x + shift`.
    pub fn affine(&mut self, a: NodeId, scale: f64, shift: f64) -> NodeId {
        let va = &self.values[a.0];
        let mut out = va.clone();
        for o in out.data.iter_mut() {
            *o = scale * *o + shift;
        }
        let ai = a.0;
        self.push(
            out,
            Some(Box::new(move |_, g, grads| {
                for (ga, gx) in grads[ai].data.iter_mut().zip(&g.data) {
                    *ga += scale * gx;
                }
            })),
        )
    }

    pub fn sigmoid(&mut self, a: NodeId) -> NodeId {
        let mut out = self.values[a.0].clone();
        for o in out.data.iter_mut() {
            *o = 1.0 / (1.0 + (-*o).exp());
        }
        let ai = a.0;
        let saved = out.clone();
        self.push(
            out,
            Some(Box::new(move |_, g, grads| {
                for (idx, gx) in g.data.iter().enumerate() {
                    let y = saved.data[idx];
                    grads[ai].data[idx] += gx * y * (1.0 - y);
                }
            })),
        )
    }

    pub fn tanh(&mut self, a: NodeId) -> NodeId {
        let mut out = self.values[a.0].clone();
        for o in out.data.iter_mut() {
            *o = o.tanh();
        }
        let ai = a.0;
        let saved = out.clone();
        self.push(
            out,
            Some(Box::new(move |_, g, grads| {
                for (idx, gx) in g.data.iter().enumerate() {
                    let y = saved.data[idx];
                    grads[ai].data[idx] += gx * (1.0 - y * y);
                }
            })),
        )
    }

    /// ReLU with subgradient 0 at the origin.
    pub fn relu(&mut self, a: NodeId) -> NodeId {
        let mut out = self.values[a.0].clone();
        for o in out.data.iter_mut() {
            if *o < 0.0 {
                *o = 0.0;
            }
        }
        let ai = a.0;
        self.push(
            out,
            Some(Box::new(move |vals, g, grads| {
                for (idx, gx) in g.data.iter().enumerate() {
                    if vals[ai].data[idx] > 0.0 {
                        grads[ai].data[idx] += gx;
                    }
                }
            })),
        )
    }

    pub fn concat_cols(&mut self, a: NodeId, b: NodeId) -> Result<NodeId, NeuralError> {
        let (va, vb) = (&self.values[a.0], &self.values[b.0]);
        if va.rows != vb.rows {
            return Err(shape_err("concat_cols", va, Some(vb)));
        }
        let (rows, ca, cb) = (va.rows, va.cols, vb.cols);
        let mut out = Tensor::zeros(rows, ca + cb);
        for i in 0..rows {
            out.data[i * (ca + cb)..i * (ca + cb) + ca].copy_from_slice(va.row(i));
            out.data[i * (ca + cb) + ca..(i + 1) * (ca + cb)].copy_from_slice(vb.row(i));
        }
        let (ai, bi) = (a.0, b.0);
        Ok(self.push(
            out,
            Some(Box::new(move |_, g, grads| {
                for i in 0..rows {
                    let grow = g.row(i).to_vec();
                    for (j, gv) in grow.iter().enumerate() {
                        if j < ca {
                            *grads[ai].at_mut(i, j) += gv;
                        } else {
                            *grads[bi].at_mut(i, j - ca) += gv;
                        }
                    }
                }
            })),
        ))
    }

    /// Stack row vectors (all 1×c) into an n×c matrix.
    pub fn concat_rows(&mut self, rows: &[NodeId]) -> Result<NodeId, NeuralError> {
        assert!(!rows.is_empty());
        let cols = self.values[rows[0].0].cols;
        for &r in rows {
            let v = &self.values[r.0];
            if v.rows != 1 || v.cols != cols {
                return Err(shape_err("concat_rows", v, None));
            }
        }
        let mut out = Tensor::zeros(rows.len(), cols);
        for (i, &r) in rows.iter().enumerate() {
            out.data[i * cols..(i + 1) * cols].copy_from_slice(&self.values[r.0].data);
        }
        let idxs: Vec<usize> = rows.iter().map(|r| r.0).collect();
        Ok(self.push(
            out,
            Some(Box::new(move |_, g, grads| {
                for (i, &ri) in idxs.iter().enumerate() {
                    let grow = &g.data[i * cols..(i + 1) * cols];
                    for (gd, gx) in grads[ri].data.iter_mut().zip(grow) {
                        *gd += gx;
                    }
                }
            })),
        ))
    }

    /// Extract one row of a matrix as a 1×cols vector (embedding lookup).
    pub fn select_row(&mut self, a: NodeId, row: usize) -> Result<NodeId, NeuralError> {
        let va = &self.values[a.0];
        if row >= va.rows {
            return Err(shape_err("select_row", va, None));
        }
        let out = Tensor::from_vec(1, va.cols, va.row(row).to_vec());
        let ai = a.0;
        Ok(self.push(
            out,
            Some(Box::new(move |_, g, grads| {
                let cols = g.cols;
                let target = &mut grads[ai].data[row * cols..(row + 1) * cols];
                for (t, gx) in target.iter_mut().zip(&g.data) {
                    *t += gx;
                }
            })),
        ))
    }

    pub fn transpose(&mut self, a: NodeId) -> NodeId {
        let va = &self.values[a.0];
        let (m, n) = (va.rows, va.cols);
        let mut out = Tensor::zeros(n, m);
        for i in 0..m {
            for j in 0..n {
                *out.at_mut(j, i) = va.at(i, j);
            }
        }
        let ai = a.0;
        self.push(
            out,
            Some(Box::new(move |_, g, grads| {
                for i in 0..g.rows {
                    for j in 0..g.cols {
                        *grads[ai].at_mut(j, i) += g.at(i, j);
                    }
                }
            })),
        )
    }

    /// Row-wise numerically stable softmax.
    pub fn softmax_rows(&mut self, a: NodeId) -> NodeId {
        let va = &self.values[a.0];
        let mut out = va.clone();
        for i in 0..out.rows {
            let row = &mut out.data[i * out.cols..(i + 1) * out.cols];
            let max = row.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
            let mut sum = 0.0;
            for v in row.iter_mut() {
                *v = (*v - max).exp();
                sum += *v;
            }
            for v in row.iter_mut() {
                *v /= sum;
            }
        }
        let ai = a.0;
        let saved = out.clone();
        self.push(
            out,
            Some(Box::new(move |_, g, grads| {
                let cols = saved.cols;
                for i in 0..saved.rows {
                    let y = &saved.data[i * cols..(i + 1) * cols];
                    let gr = &g.data[i * cols..(i + 1) * cols];
                    let dot: f64 = y.iter().zip(gr).map(|(a, b)| a * b).sum();
                    let target = &mut grads[ai].data[i * cols..(i + 1) * cols];
                    for j in 0..cols {
                        target[j] += y[j] * (gr[j] - dot);
                    }
                }
            })),
        )
    }

    /// Sum of scalar nodes.
    pub fn add_n(&mut self, terms: &[NodeId]) -> NodeId {
        assert!(!terms.is_empty());
        let mut total = 0.0;
        for &t in terms {
            assert!(self.values[t.0].is_scalar(), "add_n expects scalars");
            total += self.values[t.0].value();
        }
        let idxs: Vec<usize> = terms.iter().map(|t| t.0).collect();
        self.push(
            Tensor::scalar(total),
            Some(Box::new(move |_, g, grads| {
                let gx = g.data[0];
                for &i in &idxs {
                    grads[i].data[0] += gx;
                }
            })),
        )
    }

    /// Fused, stable cross-entropy of `softmax(logits * inv_temp)` against a
    /// hard target index. Backward is `inv_temp * (softmax - onehot)`.
    pub fn cross_entropy_logits(
        &mut self,
        logits: NodeId,
        target: usize,
        inv_temp: f64,
    ) -> Result<NodeId, NeuralError> {
        let v = &self.values[logits.0];
        if v.rows != 1 || target >= v.cols {
            return Err(shape_err("cross_entropy_logits", v, None));
        }
        let scaled: Vec<f64> = v.data.iter().map(|x| x * inv_temp).collect();
        let max = scaled.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        let lse = max + scaled.iter().map(|x| (x - max).exp()).sum::<f64>().ln();
        let loss = lse - scaled[target];
        let probs: Vec<f64> = scaled.iter().map(|x| (x - lse).exp()).collect();
        let ai = logits.0;
        Ok(self.push(
            Tensor::scalar(loss),
            Some(Box::new(move |_, g, grads| {
                let gx = g.data[0];
                for (j, p) in probs.iter().enumerate() {
                    let ind = if j == target { 1.0 } else { 0.0 };
                    grads[ai].data[j] += gx * inv_temp * (p - ind);
                }
            })),
        ))
    }

    /// Temperature-relaxed one-hot: `softmax(logits / tau)`.
    pub fn soft_output(&mut self, logits: NodeId, tau: f64) -> Result<NodeId, NeuralError> {
        if tau <= 0.0 {
            return Err(NeuralError::BadTemperature { tau });
        }
        let scaled = self.affine(logits, 1.0 / tau, 0.0);
        Ok(self.softmax_rows(scaled))
    }
}
