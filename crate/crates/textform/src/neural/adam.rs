//! Adam optimizer with bias correction over a flat parameter list.

use super::tensor::Tensor;

pub const DEFAULT_LR: f64 = 0.001;

#[derive(Debug, Clone)]
pub struct Adam {
    pub lr: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
    step: u64,
    m: Vec<Tensor>,
    v: Vec<Tensor>,
}

impl Adam {
    pub fn new(lr: f64) -> Self {
        Adam { lr, beta1: 0.9, beta2: 0.999, eps: 1e-8, step: 0, m: Vec::new(), v: Vec::new() }
    }

    pub fn steps_taken(&self) -> u64 {
        self.step
    }

    /// Apply one update. `visit_params` must call its argument once per
    /// parameter tensor, in the same order as `grads`; moment buffers are
    /// allocated on first use and their count is pinned from then on.
    pub fn step_with(
        &mut self,
        grads: &[Tensor],
        visit_params: impl FnOnce(&mut dyn FnMut(&mut Tensor)),
    ) {
        if self.m.is_empty() {
            self.m = grads.iter().map(Tensor::zeros_like).collect();
            self.v = grads.iter().map(Tensor::zeros_like).collect();
        }
        assert_eq!(self.m.len(), grads.len(), "optimizer bound to a different parameter set");
        self.step += 1;
        let t = self.step as i32;
        let bc1 = 1.0 - self.beta1.powi(t);
        let bc2 = 1.0 - self.beta2.powi(t);
        let (lr, b1, b2, eps) = (self.lr, self.beta1, self.beta2, self.eps);
        let (ms, vs) = (&mut self.m, &mut self.v);
        let mut idx = 0usize;
        visit_params(&mut |p: &mut Tensor| {
            let g = &grads[idx];
            assert_eq!(p.numel(), g.numel(), "parameter/gradient shape mismatch");
            let (m, v) = (&mut ms[idx], &mut vs[idx]);
            for i in 0..p.data.len() {
                let gi = g.data[i];
                m.data[i] = b1 * m.data[i] + (1.0 - b1) * gi;
                v.data[i] = b2 * v.data[i] + (1.0 - b2) * gi * gi;
                let m_hat = m.data[i] / bc1;
                let v_hat = v.data[i] / bc2;
                p.data[i] -= lr * m_hat / (v_hat.sqrt() + eps);
            }
            idx += 1;
        });
        assert_eq!(idx, grads.len(), "visit_params count mismatch");
    }

    /// Convenience wrapper over [`Adam::step_with`] for a flat slice.
    pub fn step(&mut self, params: Vec<&mut Tensor>, grads: &[Tensor]) {
        let mut iter = params.into_iter();
        self.step_with(grads, |f| {
            for p in iter.by_ref() {
                f(p);
            }
        });
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn first_step_moves_by_lr() {
        // With bias correction, the very first Adam step has magnitude
        // lr·g/(|g| + eps') ≈ lr regardless of gradient scale.
        let mut p = Tensor::from_vec(1, 2, vec![1.0, -2.0]);
        let g = Tensor::from_vec(1, 2, vec![400.0, -0.003]);
        let mut opt = Adam::new(0.01);
        opt.step(vec![&mut p], &[g]);
        assert!((p.data[0] - (1.0 - 0.01)).abs() < 1e-6);
        assert!((p.data[1] - (-2.0 + 0.01)).abs() < 1e-6);
    }

    #[test]
    fn converges_on_quadratic() {
        // Minimize f(x) = (x - 3)^2 with gradient 2(x - 3).
        let mut p = Tensor::from_vec(1, 1, vec![0.0]);
        let mut opt = Adam::new(0.05);
        for _ in 0..2000 {
            let g = Tensor::from_vec(1, 1, vec![2.0 * (p.data[0] - 3.0)]);
            opt.step(vec![&mut p], &[g]);
        }
        assert!((p.data[0] - 3.0).abs() < 1e-3);
    }

    #[test]
    fn zero_gradient_is_a_fixed_point_from_rest() {
        let mut p = Tensor::from_vec(1, 1, vec![5.0]);
        let mut opt = Adam::new(0.1);
        opt.step(vec![&mut p], &[Tensor::zeros(1, 1)]);
        assert_eq!(p.data[0], 5.0);
    }
}
