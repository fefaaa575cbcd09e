//! The assembled classifier.

use super::backbone::Backbone;
use super::config::FusionModelConfig;
use super::{ModelError, Result};
use crate::layers::{BatchNormParams, DenseParams, DropoutSpec, SEBlockParams};
use crate::tensor::{Mode, Scalar, Tape, Tensor};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// Which feature-extractor branch an operation refers to.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Branch {
    A,
    B,
}

/// Threshold probabilities at 0.5; ties go to the positive class.
pub fn labels_from_probs<E: Scalar>(probs: &[E]) -> Vec<u8> {
    let half = E::from_f64(0.5);
    probs.iter().map(|&p| u8::from(p >= half)).collect()
}

/// Instantiated parameters of the full fusion topology:
/// branch -> SE per branch -> concat -> global average pool ->
/// dense/relu/norm/dropout twice -> single-unit sigmoid head.
pub struct FusionModel<E: Scalar = f32> {
    config: FusionModelConfig,
    branch_a: Backbone<E>,
    branch_b: Backbone<E>,
    se_a: SEBlockParams<E>,
    se_b: SEBlockParams<E>,
    dense1: DenseParams<E>,
    norm1: BatchNormParams<E>,
    drop1: DropoutSpec,
    dense2: DenseParams<E>,
    norm2: BatchNormParams<E>,
    drop2: DropoutSpec,
    head: DenseParams<E>,
}

impl<E: Scalar> std::fmt::Debug for FusionModel<E> {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        let (total, trainable) = self.parameter_count();
        write!(
            f,
            "FusionModel(input={}x{}, fused_channels={}, params={total}, trainable={trainable})",
            self.config.input_size.0,
            self.config.input_size.1,
            self.config.fused_channels()
        )
    }
}

impl<E: Scalar> FusionModel<E> {
    /// Build and initialize from a config; all draws come from the config
    /// seed, so identical configs produce bit-identical parameters.
    pub fn build(config: FusionModelConfig) -> Result<Self> {
        config.validate()?;
        let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
        let branch_a = Backbone::build(&config.branch_a, &mut rng)?;
        let branch_b = Backbone::build(&config.branch_b, &mut rng)?;
        let se_a = SEBlockParams::new(config.branch_a.output_channels, config.se_ratio, &mut rng)?;
        let se_b = SEBlockParams::new(config.branch_b.output_channels, config.se_ratio, &mut rng)?;
        let fused = config.fused_channels();
        let dense1 = DenseParams::new(fused, config.dense1_units, &mut rng)?;
        let norm1 = BatchNormParams::new(config.dense1_units);
        let drop1 = DropoutSpec::new(config.dense1_dropout)?;
        let dense2 = DenseParams::new(config.dense1_units, config.dense2_units, &mut rng)?;
        let norm2 = BatchNormParams::new(config.dense2_units);
        let drop2 = DropoutSpec::new(config.dense2_dropout)?;
        let head = DenseParams::new(config.dense2_units, 1, &mut rng)?;

        let model = FusionModel {
            config,
            branch_a,
            branch_b,
            se_a,
            se_b,
            dense1,
            norm1,
            drop1,
            dense2,
            norm2,
            drop2,
            head,
        };
        for (_, p) in model.fusion_parameters() {
            p.set_requires_grad(true);
        }
        Ok(model)
    }

    pub fn config(&self) -> &FusionModelConfig {
        &self.config
    }

    /// Per-sample probability of the positive class, shape `[n]`.
    ///
    /// Training mode applies batch statistics and dropout (driven by `rng`);
    /// inference mode is deterministic.
    pub fn forward(
        &self,
        tape: &mut Tape<E>,
        batch: &Tensor<E>,
        mode: Mode,
        rng: &mut ChaCha8Rng,
    ) -> Result<Tensor<E>> {
        let (h, w) = self.config.input_size;
        let expected = vec![batch.shape().first().copied().unwrap_or(0), 3, h, w];
        if batch.rank() != 4 || batch.shape()[1..] != expected[1..] {
            return Err(ModelError::InputMismatch {
                expected,
                actual: batch.shape().to_vec(),
            });
        }
        let n = batch.shape()[0];

        let feat_a = self.branch_a.forward(tape, batch, mode)?;
        let feat_b = self.branch_b.forward(tape, batch, mode)?;
        let feat_a = self.se_a.forward(tape, &feat_a)?;
        let feat_b = self.se_b.forward(tape, &feat_b)?;
        let fused = tape.concat_channels(&feat_a, &feat_b)?;
        let pooled = tape.global_avg_pool(&fused)?;

        let mut h = self.dense1.forward(tape, &pooled)?;
        h = tape.relu(&h);
        h = self.norm1.forward(tape, &h, mode)?;
        h = self.drop1.forward(tape, &h, mode, rng)?;

        h = self.dense2.forward(tape, &h)?;
        h = tape.relu(&h);
        h = self.norm2.forward(tape, &h, mode)?;
        h = self.drop2.forward(tape, &h, mode, rng)?;

        let logits = self.head.forward(tape, &h)?;
        let flat = tape.reshape(&logits, &[n])?;
        Ok(tape.sigmoid(&flat))
    }

    /// Deterministic inference forward on a throwaway tape.
    pub fn infer(&self, batch: &Tensor<E>) -> Result<Tensor<E>> {
        let mut tape = Tape::inference();
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        self.forward(&mut tape, batch, Mode::Inference, &mut rng)
    }

    /// Hard labels at threshold 0.5 (ties to the positive class).
    pub fn predict(&self, batch: &Tensor<E>) -> Result<Vec<u8>> {
        Ok(labels_from_probs(&self.infer(batch)?.to_vec()))
    }

    /// Mark exactly the last `n` parameterized layers of a branch trainable.
    pub fn set_trainable_tail(&mut self, branch: Branch, n: usize) -> Result<()> {
        match branch {
            Branch::A => self.branch_a.set_trainable_tail(n),
            Branch::B => self.branch_b.set_trainable_tail(n),
        }
    }

    pub fn branch(&self, branch: Branch) -> &Backbone<E> {
        match branch {
            Branch::A => &self.branch_a,
            Branch::B => &self.branch_b,
        }
    }

    /// Swap a stage's conv kernel handle; lets verification graft a probe
    /// tensor into the live graph.
    pub(crate) fn graft_stage_weight(&mut self, branch: Branch, stage: usize, weight: Tensor<E>) {
        let backbone = match branch {
            Branch::A => &mut self.branch_a,
            Branch::B => &mut self.branch_b,
        };
        backbone.stages_mut()[stage].weight = weight;
    }

    fn fusion_parameters(&self) -> Vec<(String, Tensor<E>)> {
        let mut out = Vec::new();
        for (name, t) in self.se_a.parameters() {
            out.push((format!("se_a.{name}"), t));
        }
        for (name, t) in self.se_b.parameters() {
            out.push((format!("se_b.{name}"), t));
        }
        for (name, t) in self.dense1.parameters() {
            out.push((format!("dense1.{name}"), t));
        }
        for (name, t) in self.norm1.parameters() {
            out.push((format!("norm1.{name}"), t));
        }
        for (name, t) in self.dense2.parameters() {
            out.push((format!("dense2.{name}"), t));
        }
        for (name, t) in self.norm2.parameters() {
            out.push((format!("norm2.{name}"), t));
        }
        for (name, t) in self.head.parameters() {
            out.push((format!("head.{name}"), t));
        }
        out
    }

    /// Every optimizer-visible parameter in a stable order.
    pub fn named_parameters(&self) -> Vec<(String, Tensor<E>)> {
        let mut out = self.branch_a.named_parameters("branch_a");
        out.extend(self.branch_b.named_parameters("branch_b"));
        out.extend(self.fusion_parameters());
        out
    }

    /// Non-optimized state (batch-norm running statistics).
    pub fn named_buffers(&self) -> Vec<(String, Tensor<E>)> {
        let mut out = self.branch_a.named_buffers("branch_a");
        out.extend(self.branch_b.named_buffers("branch_b"));
        for (name, t) in self.norm1.buffers() {
            out.push((format!("norm1.{name}"), t));
        }
        for (name, t) in self.norm2.buffers() {
            out.push((format!("norm2.{name}"), t));
        }
        out
    }

    /// Parameters plus buffers: the full checkpointable state.
    pub fn named_tensors(&self) -> Vec<(String, Tensor<E>)> {
        let mut out = self.named_parameters();
        out.extend(self.named_buffers());
        out
    }

    /// `(total, trainable)` parameter element counts.
    pub fn parameter_count(&self) -> (usize, usize) {
        let mut total = 0;
        let mut trainable = 0;
        for (_, p) in self.named_parameters() {
            total += p.numel();
            if p.requires_grad() {
                trainable += p.numel();
            }
        }
        (total, trainable)
    }

    pub fn zero_grads(&self) {
        for (_, p) in self.named_parameters() {
            p.zero_grad();
        }
    }

    /// Mirror the model at a different element precision, copying every
    /// tensor value and trainable flag.
    pub fn cast<F: Scalar>(&self) -> Result<FusionModel<F>> {
        let copy = FusionModel::<F>::build(self.config.clone())?;
        let src = self.named_tensors();
        for ((_, dst), (_, src)) in copy.named_tensors().iter().zip(&src) {
            let values: Vec<F> = src.read().iter().map(|&v| F::from_f64(v.to_f64())).collect();
            dst.update_data(|d| d.copy_from_slice(&values));
            dst.set_requires_grad(src.requires_grad());
        }
        Ok(copy)
    }
}
