//! Inverted dropout: survivors are rescaled at training time so that
//! inference is the identity map.

use super::{LayerError, Result};
use crate::tensor::{Mode, Scalar, Tape, Tensor};
use rand::Rng;
use rand_chacha::ChaCha8Rng;

#[derive(Debug, Clone, Copy)]
pub struct DropoutSpec {
    rate: f64,
}

impl DropoutSpec {
    pub fn new(rate: f64) -> Result<Self> {
        if !(0.0..1.0).contains(&rate) {
            return Err(LayerError::InvalidDropoutRate { rate });
        }
        Ok(DropoutSpec { rate })
    }

    pub fn rate(&self) -> f64 {
        self.rate
    }

    /// Training: zero each element with probability `rate`, scale survivors
    /// by `1/(1-rate)`. Inference: identity.
    pub fn forward<E: Scalar>(
        &self,
        tape: &mut Tape<E>,
        x: &Tensor<E>,
        mode: Mode,
        rng: &mut ChaCha8Rng,
    ) -> Result<Tensor<E>> {
        if mode == Mode::Inference || self.rate == 0.0 {
            return Ok(x.clone());
        }
        let keep_scale = E::from_f64(1.0 / (1.0 - self.rate));
        let mask: Vec<E> = (0..x.numel())
            .map(|_| {
                if rng.gen::<f64>() < self.rate {
                    E::zero()
                } else {
                    keep_scale
                }
            })
            .collect();
        Ok(tape.apply_mask(x, mask)?)
    }
}
