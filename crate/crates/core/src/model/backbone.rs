//! Convolutional feature-extractor branches.

use super::config::{BackboneConfig, StageSpec};
use super::Result;
use crate::layers::{uniform_fan_in, BatchNormParams};
use crate::tensor::{Mode, Scalar, Tape, Tensor};
use rand_chacha::ChaCha8Rng;

/// One conv stage with optional batch norm and shortcut.
///
/// Frozen stages run their batch norm on running statistics even during
/// training, so a fully frozen branch is bit-stable across optimizer steps.
pub struct ConvStage<E: Scalar = f32> {
    pub spec: StageSpec,
    pub weight: Tensor<E>,
    pub bias: Tensor<E>,
    pub norm: Option<BatchNormParams<E>>,
    trainable: bool,
}

impl<E: Scalar> ConvStage<E> {
    fn new(spec: StageSpec, in_channels: usize, rng: &mut ChaCha8Rng) -> Self {
        let fan_in = in_channels * spec.kernel * spec.kernel;
        let weight = uniform_fan_in(&[spec.filters, in_channels, spec.kernel, spec.kernel], fan_in, rng);
        let bias = Tensor::zeros(&[spec.filters]);
        // Pre-activation stages normalize their input channels, plain
        // stages their output channels.
        let norm = spec.batch_norm.then(|| {
            BatchNormParams::new(if spec.residual_skip { in_channels } else { spec.filters })
        });
        ConvStage { spec, weight, bias, norm, trainable: true }
    }

    pub fn is_trainable(&self) -> bool {
        self.trainable
    }

    fn set_trainable(&mut self, trainable: bool) {
        self.trainable = trainable;
        self.weight.set_requires_grad(trainable);
        self.bias.set_requires_grad(trainable);
        if let Some(norm) = &self.norm {
            norm.gamma.set_requires_grad(trainable);
            norm.beta.set_requires_grad(trainable);
        }
    }

    fn forward(&self, tape: &mut Tape<E>, x: &Tensor<E>, mode: Mode) -> Result<Tensor<E>> {
        // A frozen norm layer downgrades itself to the inference path.
        if self.spec.residual_skip {
            let mut h = x.clone();
            if let Some(norm) = &self.norm {
                h = norm.forward(tape, &h, mode)?;
            }
            h = tape.relu(&h);
            h = tape.conv2d(&h, &self.weight, self.spec.stride, self.spec.padding())?;
            h = tape.add_channel_bias(&h, &self.bias)?;
            Ok(tape.add(x, &h)?)
        } else {
            let mut h = tape.conv2d(x, &self.weight, self.spec.stride, self.spec.padding())?;
            h = tape.add_channel_bias(&h, &self.bias)?;
            if let Some(norm) = &self.norm {
                h = norm.forward(tape, &h, mode)?;
            }
            Ok(tape.relu(&h))
        }
    }
}

/// Ordered conv stages; the desk-scale stand-in for a pretrained extractor.
pub struct Backbone<E: Scalar = f32> {
    pub name: String,
    stages: Vec<ConvStage<E>>,
}

impl<E: Scalar> Backbone<E> {
    /// Build from a validated config; freezing policy is applied from
    /// `trainable_tail_layers`.
    pub fn build(cfg: &BackboneConfig, rng: &mut ChaCha8Rng) -> Result<Self> {
        let mut stages = Vec::with_capacity(cfg.stages.len());
        let mut channels = 3usize;
        for spec in &cfg.stages {
            let stage = ConvStage::new(spec.clone(), channels, rng);
            channels = spec.filters;
            stages.push(stage);
        }
        let mut backbone = Backbone { name: cfg.name.clone(), stages };
        backbone.set_trainable_tail(cfg.trainable_tail_layers)?;
        Ok(backbone)
    }

    /// Number of parameterized (conv) layers.
    pub fn layer_count(&self) -> usize {
        self.stages.len()
    }

    pub fn stages(&self) -> &[ConvStage<E>] {
        &self.stages
    }

    pub(crate) fn stages_mut(&mut self) -> &mut [ConvStage<E>] {
        &mut self.stages
    }

    /// Mark exactly the last `n` conv layers (and their norms) trainable.
    pub fn set_trainable_tail(&mut self, n: usize) -> Result<()> {
        if n > self.stages.len() {
            return Err(super::ModelError::TailOutOfRange {
                requested: n,
                available: self.stages.len(),
            });
        }
        let frozen = self.stages.len() - n;
        for (i, stage) in self.stages.iter_mut().enumerate() {
            stage.set_trainable(i >= frozen);
        }
        Ok(())
    }

    pub fn forward(&self, tape: &mut Tape<E>, x: &Tensor<E>, mode: Mode) -> Result<Tensor<E>> {
        let mut h = x.clone();
        for stage in &self.stages {
            h = stage.forward(tape, &h, mode)?;
        }
        Ok(h)
    }

    /// Optimizer-visible parameters, prefixed `stage<i>.`.
    pub fn named_parameters(&self, prefix: &str) -> Vec<(String, Tensor<E>)> {
        let mut out = Vec::new();
        for (i, stage) in self.stages.iter().enumerate() {
            out.push((format!("{prefix}.stage{i}.conv.weight"), stage.weight.clone()));
            out.push((format!("{prefix}.stage{i}.conv.bias"), stage.bias.clone()));
            if let Some(norm) = &stage.norm {
                out.push((format!("{prefix}.stage{i}.norm.gamma"), norm.gamma.clone()));
                out.push((format!("{prefix}.stage{i}.norm.beta"), norm.beta.clone()));
            }
        }
        out
    }

    /// Running statistics, prefixed `stage<i>.`.
    pub fn named_buffers(&self, prefix: &str) -> Vec<(String, Tensor<E>)> {
        let mut out = Vec::new();
        for (i, stage) in self.stages.iter().enumerate() {
            if let Some(norm) = &stage.norm {
                out.push((format!("{prefix}.stage{i}.norm.running_mean"), norm.running_mean.clone()));
                out.push((format!("{prefix}.stage{i}.norm.running_var"), norm.running_var.clone()));
            }
        }
        out
    }
}
