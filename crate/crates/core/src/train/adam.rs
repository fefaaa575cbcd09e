//! Adam with bias correction.

use super::{Result, TrainError};
use crate::tensor::{Scalar, Tensor};
use std::collections::BTreeMap;

/// Optimizer state: hyperparameters plus per-parameter moment buffers,
/// keyed by parameter name so the update order is deterministic.
pub struct AdamState<E: Scalar = f32> {
    pub learning_rate: E,
    pub beta1: E,
    pub beta2: E,
    pub epsilon: E,
    moments: BTreeMap<String, (Vec<E>, Vec<E>)>,
    step_count: u64,
}

impl<E: Scalar> AdamState<E> {
    /// Defaults: beta1 0.9, beta2 0.999, epsilon 1e-8.
    pub fn new(learning_rate: f64) -> Self {
        AdamState {
            learning_rate: E::from_f64(learning_rate),
            beta1: E::from_f64(0.9),
            beta2: E::from_f64(0.999),
            epsilon: E::from_f64(1e-8),
            moments: BTreeMap::new(),
            step_count: 0,
        }
    }

    pub fn step_count(&self) -> u64 {
        self.step_count
    }

    /// One update over every gradient-tracked parameter. Frozen parameters
    /// are untouched; a tracked parameter without a gradient is an error.
    ///
    /// Gradients are consumed: each tensor's gradient buffer is cleared
    /// after its update so the next batch accumulates from zero.
    pub fn step(&mut self, params: &[(String, Tensor<E>)]) -> Result<()> {
        self.step_count += 1;
        let t = self.step_count as i32;
        let one = E::one();
        let bias1 = one - self.beta1.powi(t);
        let bias2 = one - self.beta2.powi(t);

        for (name, param) in params {
            if !param.requires_grad() {
                continue;
            }
            let grad = param
                .grad()
                .ok_or_else(|| TrainError::MissingGradient { name: name.clone() })?;
            let (m, v) = self
                .moments
                .entry(name.clone())
                .or_insert_with(|| (vec![E::zero(); grad.len()], vec![E::zero(); grad.len()]));
            param.update_data(|data| {
                for i in 0..data.len() {
                    let g = grad[i];
                    m[i] = self.beta1 * m[i] + (one - self.beta1) * g;
                    v[i] = self.beta2 * v[i] + (one - self.beta2) * g * g;
                    let m_hat = m[i] / bias1;
                    let v_hat = v[i] / bias2;
                    data[i] = data[i] - self.learning_rate * m_hat / (v_hat.sqrt() + self.epsilon);
                }
            });
            param.zero_grad();
        }
        Ok(())
    }
}
