//! Squeeze-and-excitation channel attention.
//!
//! Squeeze pools each channel to its spatial mean, excitation passes the
//! pooled vector through a two-matrix bottleneck (`relu` then `sigmoid`,
//! no biases), and the resulting per-channel weights rescale the feature
//! map. Output shape always equals input shape.

use super::{init::uniform_fan_in, LayerError, Result};
use crate::tensor::{Scalar, Tape, Tensor};
use rand_chacha::ChaCha8Rng;

/// Bottleneck weights of the excitation map.
///
/// `w1` projects `[c]` down to `[c / r]`, `w2` back up to `[c]`. The
/// reduction ratio falls back to `r = c` when `c < r`, so narrow maps get a
/// single-unit bottleneck instead of an error.
pub struct SEBlockParams<E: Scalar = f32> {
    pub w1: Tensor<E>,
    pub w2: Tensor<E>,
    reduction: usize,
}

impl<E: Scalar> SEBlockParams<E> {
    pub fn new(channels: usize, ratio: usize, rng: &mut ChaCha8Rng) -> Result<Self> {
        if channels == 0 || ratio == 0 {
            return Err(LayerError::EmptyDimension { what: "se block width" });
        }
        let effective = if channels < ratio { channels } else { ratio };
        if !channels.is_multiple_of(effective) {
            return Err(LayerError::ReductionMismatch { channels, ratio });
        }
        let squeezed = channels / effective;
        Ok(SEBlockParams {
            w1: uniform_fan_in(&[channels, squeezed], channels, rng),
            w2: uniform_fan_in(&[squeezed, channels], squeezed, rng),
            reduction: effective,
        })
    }

    /// The ratio in effect after the narrow-map fallback.
    pub fn reduction(&self) -> usize {
        self.reduction
    }

    pub fn channels(&self) -> usize {
        self.w1.shape()[0]
    }

    /// Per-channel spatial mean: `[n,c,h,w] -> [n,c]`.
    pub fn squeeze(&self, tape: &mut Tape<E>, x: &Tensor<E>) -> Result<Tensor<E>> {
        Ok(tape.global_avg_pool(x)?)
    }

    /// `sigmoid(relu(z @ w1) @ w2)`; every component strictly in (0,1).
    pub fn excite(&self, tape: &mut Tape<E>, z: &Tensor<E>) -> Result<Tensor<E>> {
        let down = tape.matmul(z, &self.w1)?;
        let act = tape.relu(&down);
        let up = tape.matmul(&act, &self.w2)?;
        Ok(tape.sigmoid(&up))
    }

    /// Rescale the feature map by per-channel excitation weights.
    pub fn scale(&self, tape: &mut Tape<E>, x: &Tensor<E>, e: &Tensor<E>) -> Result<Tensor<E>> {
        Ok(tape.mul_channel_broadcast(x, e)?)
    }

    /// squeeze -> excite -> scale.
    pub fn forward(&self, tape: &mut Tape<E>, x: &Tensor<E>) -> Result<Tensor<E>> {
        let z = self.squeeze(tape, x)?;
        let e = self.excite(tape, &z)?;
        self.scale(tape, x, &e)
    }

    pub fn parameters(&self) -> Vec<(&'static str, Tensor<E>)> {
        vec![("w1", self.w1.clone()), ("w2", self.w2.clone())]
    }
}
