//! Binary cross-entropy.

use super::{Result, TrainError};
use crate::tensor::{Scalar, Tape, Tensor};

/// Clip applied to probabilities before the log; keeps the loss defined at
/// hard 0/1 predictions.
pub const PROB_CLIP: f64 = 1e-7;

/// Mean of `-(y*ln(p) + (1-y)*ln(1-p))` over the batch, recorded on the
/// tape so gradients flow back into `probs`.
pub fn bce_loss<E: Scalar>(tape: &mut Tape<E>, labels: &[u8], probs: &Tensor<E>) -> Result<Tensor<E>> {
    if labels.is_empty() {
        return Err(TrainError::EmptySet { which: "loss batch" });
    }
    let targets: Vec<E> = labels
        .iter()
        .map(|&l| match l {
            0 => Ok(E::zero()),
            1 => Ok(E::one()),
            other => Err(TrainError::InvalidLabel { value: other }),
        })
        .collect::<Result<_>>()?;
    Ok(tape.bce_loss(probs, &targets, E::from_f64(PROB_CLIP))?)
}
