//! Fully connected layer.

use super::{init::uniform_fan_in, LayerError, Result};
use crate::tensor::{Scalar, Tape, Tensor};
use rand_chacha::ChaCha8Rng;

/// Weights `[input x output]` plus a per-output bias.
pub struct DenseParams<E: Scalar = f32> {
    pub weights: Tensor<E>,
    pub bias: Tensor<E>,
}

impl<E: Scalar> DenseParams<E> {
    /// Seeded fan-in-scaled uniform weights, zero bias.
    pub fn new(input: usize, output: usize, rng: &mut ChaCha8Rng) -> Result<Self> {
        if input == 0 || output == 0 {
            return Err(LayerError::EmptyDimension { what: "dense layer width" });
        }
        Ok(DenseParams {
            weights: uniform_fan_in(&[input, output], input, rng),
            bias: Tensor::zeros(&[output]),
        })
    }

    pub fn input_width(&self) -> usize {
        self.weights.shape()[0]
    }

    pub fn output_width(&self) -> usize {
        self.weights.shape()[1]
    }

    /// `x @ W + bias`, bias broadcast per row.
    pub fn forward(&self, tape: &mut Tape<E>, x: &Tensor<E>) -> Result<Tensor<E>> {
        let product = tape.matmul(x, &self.weights)?;
        Ok(tape.add_row_bias(&product, &self.bias)?)
    }

    pub fn parameters(&self) -> Vec<(&'static str, Tensor<E>)> {
        vec![("weight", self.weights.clone()), ("bias", self.bias.clone())]
    }
}
