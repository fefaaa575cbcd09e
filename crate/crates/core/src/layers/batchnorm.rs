//! Per-channel batch normalization for `[n,c]` and `[n,c,h,w]` tensors.

use super::Result;
use crate::tensor::{Mode, Scalar, Tape, Tensor};

/// Learnable scale/shift plus running statistics.
///
/// Training mode normalizes by biased batch statistics and folds them into
/// the running buffers as `momentum * running + (1 - momentum) * batch`.
/// Inference mode is the affine map derived from the running statistics.
/// A frozen layer (`gamma` not gradient-tracked) always takes the inference
/// path, so its whole state is bit-stable under training.
pub struct BatchNormParams<E: Scalar = f32> {
    pub gamma: Tensor<E>,
    pub beta: Tensor<E>,
    pub running_mean: Tensor<E>,
    pub running_var: Tensor<E>,
    pub epsilon: E,
    pub momentum: E,
}

impl<E: Scalar> BatchNormParams<E> {
    pub fn new(channels: usize) -> Self {
        BatchNormParams {
            gamma: Tensor::filled(&[channels], E::one()).tracked(),
            beta: Tensor::zeros(&[channels]).tracked(),
            running_mean: Tensor::zeros(&[channels]),
            running_var: Tensor::filled(&[channels], E::one()),
            epsilon: E::from_f64(1e-5),
            momentum: E::from_f64(0.99),
        }
    }

    pub fn channels(&self) -> usize {
        self.gamma.numel()
    }

    pub fn forward(&self, tape: &mut Tape<E>, x: &Tensor<E>, mode: Mode) -> Result<Tensor<E>> {
        let mode = if self.gamma.requires_grad() { mode } else { Mode::Inference };
        match mode {
            Mode::Training => {
                let (y, mean, var) = tape.batch_norm(x, &self.gamma, &self.beta, self.epsilon)?;
                let keep = self.momentum;
                let take = E::one() - keep;
                self.running_mean.update_data(|rm| {
                    for (r, &b) in rm.iter_mut().zip(&mean) {
                        *r = keep * *r + take * b;
                    }
                });
                self.running_var.update_data(|rv| {
                    for (r, &b) in rv.iter_mut().zip(&var) {
                        *r = keep * *r + take * b;
                    }
                });
                Ok(y)
            }
            Mode::Inference => Ok(self.affine(tape, x)?),
        }
    }

    /// The frozen-statistics path: `y = gamma * (x - mean) / sqrt(var + eps)
    /// + beta` as a per-channel affine map.
    fn affine(&self, tape: &mut Tape<E>, x: &Tensor<E>) -> Result<Tensor<E>> {
        let g = self.gamma.read();
        let b = self.beta.read();
        let rm = self.running_mean.read();
        let rv = self.running_var.read();
        let mut scale = Vec::with_capacity(g.len());
        let mut shift = Vec::with_capacity(g.len());
        for i in 0..g.len() {
            let s = g[i] / (rv[i] + self.epsilon).sqrt();
            scale.push(s);
            shift.push(b[i] - rm[i] * s);
        }
        drop(g);
        drop(b);
        drop(rm);
        drop(rv);
        Ok(tape.channel_affine(x, scale, shift)?)
    }

    pub fn parameters(&self) -> Vec<(&'static str, Tensor<E>)> {
        vec![("gamma", self.gamma.clone()), ("beta", self.beta.clone())]
    }

    /// Running statistics; persisted in checkpoints but never updated by
    /// the optimizer.
    pub fn buffers(&self) -> Vec<(&'static str, Tensor<E>)> {
        vec![
            ("running_mean", self.running_mean.clone()),
            ("running_var", self.running_var.clone()),
        ]
    }
}
