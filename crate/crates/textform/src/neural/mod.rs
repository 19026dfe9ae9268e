//! Differentiable model stack: a flat-tape reverse-mode autodiff engine, the
//! control-conditioned encoder-attend-decoder, the control predictor, the
//! composite training loss, the Adam optimizer, and binary checkpoints.

pub mod adam;
pub mod checkpoint;
pub mod gradcheck;
pub mod model;
pub mod predictor;
pub mod tape;
pub mod tensor;

pub use adam::Adam;
pub use checkpoint::{load_checkpoint, save_checkpoint, RunState};
pub use gradcheck::{run_grad_check, GradCheckReport, GRAD_CHECK_TOLERANCE};
pub use model::{generate, ModelDims, ModelParams};
pub use predictor::{classify, PredictorDims, PredictorParams};
pub use tape::{NeuralError, NodeId, Tape};
pub use tensor::Tensor;

use model::{teacher_forced_logits, EncDec};
use predictor::{predict_logits, PredictorInput, PredNet};

/// The pieces of one composite-loss evaluation.
#[derive(Debug, Clone, Copy)]
pub struct CompositeLoss {
    pub total: NodeId,
    /// Reconstruction term: cross entropy against the scored variant.
    pub l1: NodeId,
    /// Control term: predictor cross entropy on the soft decoder output.
    pub l2: NodeId,
}

/// Weighted training objective `λ·L2 + (1−λ)·L1` over one triple: the
/// decoder is teacher-forced toward `targets`, and its temperature-softened
/// output distributions are fed to the (typically frozen) control predictor.
#[allow(clippy::too_many_arguments)]
pub fn composite_loss(
    tape: &mut Tape,
    model_nodes: &EncDec<NodeId>,
    model_dims: &ModelDims,
    pred_nodes: &PredNet<NodeId>,
    pred_dims: &PredictorDims,
    x_ids: &[usize],
    targets: &[usize],
    control: usize,
    lambda: f64,
    tau: f64,
) -> Result<CompositeLoss, NeuralError> {
    if !(0.0..=1.0).contains(&lambda) || !lambda.is_finite() {
        return Err(NeuralError::BadLambda { lambda });
    }
    let c_idx = model::valid_control(control, model_dims)?;
    if targets.is_empty() {
        return Err(NeuralError::EmptyInput);
    }
    let logits = teacher_forced_logits(tape, model_nodes, model_dims, x_ids, targets, control)?;
    let l1 = model::sequence_loss(tape, &logits, targets, tau)?;

    let dists: Vec<NodeId> = logits
        .iter()
        .map(|&l| tape.soft_output(l, tau))
        .collect::<Result<_, _>>()?;
    let pred_logits =
        predict_logits(tape, pred_nodes, pred_dims, x_ids, PredictorInput::Soft(&dists))?;
    let l2 = tape.cross_entropy_logits(pred_logits, c_idx, 1.0)?;

    let weighted_l2 = tape.affine(l2, lambda, 0.0);
    let weighted_l1 = tape.affine(l1, 1.0 - lambda, 0.0);
    let total = tape.add(weighted_l2, weighted_l1)?;
    Ok(CompositeLoss { total, l1, l2 })
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn setup(seed: u64) -> (ModelParams, PredictorParams) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let model = ModelParams::init(ModelDims::tiny(12), &mut rng);
        let pred = PredictorParams::init(PredictorDims::tiny(12), &mut rng);
        (model, pred)
    }

    fn eval_loss(
        model: &ModelParams,
        pred: &PredictorParams,
        lambda: f64,
    ) -> (f64, f64, f64) {
        let mut tape = Tape::new();
        let mn = model.bind(&mut tape);
        let pn = pred.bind(&mut tape);
        let parts = composite_loss(
            &mut tape,
            &mn,
            &model.dims,
            &pn,
            &pred.dims,
            &[4, 5, 6],
            &[5, 4, crate::textcore::EOS],
            2,
            lambda,
            1.0,
        )
        .unwrap();
        (
            tape.value(parts.total).value(),
            tape.value(parts.l1).value(),
            tape.value(parts.l2).value(),
        )
    }

    #[test]
    fn loss_is_positive_and_combines_linearly() {
        let (model, pred) = setup(0);
        let (total, l1, l2) = eval_loss(&model, &pred, 0.1);
        assert!(l1 > 0.0 && l2 > 0.0);
        assert!((total - (0.1 * l2 + 0.9 * l1)).abs() < 1e-12);
    }

    #[test]
    fn lambda_zero_is_pure_reconstruction() {
        let (model, pred) = setup(1);
        let (total, l1, _) = eval_loss(&model, &pred, 0.0);
        assert!((total - l1).abs() < 1e-12);
    }

    #[test]
    fn lambda_zero_kills_predictor_gradient() {
        let (model, pred) = setup(2);
        let mut tape = Tape::new();
        let mn = model.bind(&mut tape);
        let pn = pred.bind(&mut tape);
        let parts = composite_loss(
            &mut tape,
            &mn,
            &model.dims,
            &pn,
            &pred.dims,
            &[4, 5, 6],
            &[5, crate::textcore::EOS],
            3,
            0.0,
            1.0,
        )
        .unwrap();
        let grads = tape.backward(parts.total);
        // With λ=0 the L2 branch contributes nothing, so predictor-only
        // parameters (the classifier head) get exactly zero gradient.
        for id in [pn.w_c, pn.b_c, pn.w_h, pn.b_h] {
            assert!(grads[id.0].data.iter().all(|g| *g == 0.0));
        }
    }

    #[test]
    fn bad_lambda_rejected() {
        let (model, pred) = setup(3);
        let mut tape = Tape::new();
        let mn = model.bind(&mut tape);
        let pn = pred.bind(&mut tape);
        let err = composite_loss(
            &mut tape,
            &mn,
            &model.dims,
            &pn,
            &pred.dims,
            &[4],
            &[4],
            1,
            1.5,
            1.0,
        )
        .unwrap_err();
        assert!(matches!(err, NeuralError::BadLambda { .. }));
    }
}
