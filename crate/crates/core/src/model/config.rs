//! Architecture description types and the stock configurations.

use super::{ModelError, Result};

/// One convolutional stage of a backbone.
///
/// Stages with `residual_skip` use pre-activation ordering
/// (norm -> relu -> conv, plus the identity shortcut) and therefore require
/// `stride == 1` and an unchanged channel count. Plain stages run
/// conv -> norm -> relu.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct StageSpec {
    pub filters: usize,
    pub kernel: usize,
    pub stride: usize,
    pub batch_norm: bool,
    pub residual_skip: bool,
}

impl StageSpec {
    pub fn plain(filters: usize, kernel: usize, stride: usize) -> Self {
        StageSpec { filters, kernel, stride, batch_norm: true, residual_skip: false }
    }

    pub fn skip(filters: usize, kernel: usize) -> Self {
        StageSpec { filters, kernel, stride: 1, batch_norm: true, residual_skip: true }
    }

    pub fn padding(&self) -> usize {
        self.kernel / 2
    }
}

/// A feature-extractor branch: ordered conv stages plus freezing policy.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct BackboneConfig {
    pub name: String,
    pub stages: Vec<StageSpec>,
    pub output_channels: usize,
    pub trainable_tail_layers: usize,
}

impl BackboneConfig {
    /// Spatial extent after all stages, for a square input of `size`.
    pub fn output_spatial(&self, mut h: usize, mut w: usize) -> (usize, usize) {
        for stage in &self.stages {
            let p = stage.padding();
            h = (h + 2 * p - stage.kernel) / stage.stride + 1;
            w = (w + 2 * p - stage.kernel) / stage.stride + 1;
        }
        (h, w)
    }

    pub fn validate(&self, input: (usize, usize)) -> Result<()> {
        if self.stages.is_empty() {
            return Err(ModelError::InvalidConfig {
                reason: format!("backbone {} has no stages", self.name),
            });
        }
        let (mut h, mut w) = input;
        let mut channels = 3usize;
        for (i, stage) in self.stages.iter().enumerate() {
            if stage.filters == 0 || stage.kernel == 0 || stage.stride == 0 {
                return Err(ModelError::InvalidConfig {
                    reason: format!("backbone {} stage {i} has a zero extent", self.name),
                });
            }
            if stage.residual_skip && (stage.stride != 1 || stage.filters != channels) {
                return Err(ModelError::InvalidConfig {
                    reason: format!(
                        "backbone {} stage {i}: residual skip requires stride 1 and {channels} filters",
                        self.name
                    ),
                });
            }
            let p = stage.padding();
            if h + 2 * p < stage.kernel || w + 2 * p < stage.kernel {
                return Err(ModelError::InvalidConfig {
                    reason: format!(
                        "backbone {} stage {i}: kernel {} exceeds {h}x{w} input",
                        self.name, stage.kernel
                    ),
                });
            }
            h = (h + 2 * p - stage.kernel) / stage.stride + 1;
            w = (w + 2 * p - stage.kernel) / stage.stride + 1;
            channels = stage.filters;
        }
        if channels != self.output_channels {
            return Err(ModelError::OutputChannelMismatch {
                declared: self.output_channels,
                actual: channels,
            });
        }
        if self.trainable_tail_layers > self.stages.len() {
            return Err(ModelError::TailOutOfRange {
                requested: self.trainable_tail_layers,
                available: self.stages.len(),
            });
        }
        Ok(())
    }
}

/// Full architecture description plus the initialization seed.
#[derive(Debug, Clone, PartialEq)]
pub struct FusionModelConfig {
    pub branch_a: BackboneConfig,
    pub branch_b: BackboneConfig,
    pub se_ratio: usize,
    pub dense1_units: usize,
    pub dense1_dropout: f64,
    pub dense2_units: usize,
    pub dense2_dropout: f64,
    /// Input height and width; channel count is fixed at 3.
    pub input_size: (usize, usize),
    pub seed: u64,
}

impl FusionModelConfig {
    /// Reference configuration: 224x224 input, dense blocks of 256 and 128
    /// units with dropout 0.2 and 0.1, three trainable tail layers per
    /// branch and squeeze-excitation ratio 16.
    pub fn reference(seed: u64) -> Self {
        FusionModelConfig {
            branch_a: BackboneConfig {
                name: "widening".into(),
                stages: vec![
                    StageSpec::plain(8, 3, 2),
                    StageSpec::plain(16, 3, 2),
                    StageSpec::plain(32, 3, 2),
                ],
                output_channels: 32,
                trainable_tail_layers: 3,
            },
            branch_b: BackboneConfig {
                name: "residual".into(),
                stages: vec![
                    StageSpec::plain(16, 3, 2),
                    StageSpec::skip(16, 3),
                    StageSpec::plain(32, 3, 2),
                    StageSpec::skip(32, 3),
                    StageSpec::plain(32, 3, 2),
                ],
                output_channels: 32,
                trainable_tail_layers: 3,
            },
            se_ratio: 16,
            dense1_units: 256,
            dense1_dropout: 0.2,
            dense2_units: 128,
            dense2_dropout: 0.1,
            input_size: (224, 224),
            seed,
        }
    }

    /// Small configuration for fast CPU experiments: same topology shape,
    /// far fewer channels and units.
    pub fn desk_scale(input: usize, seed: u64) -> Self {
        FusionModelConfig {
            branch_a: BackboneConfig {
                name: "widening".into(),
                stages: vec![StageSpec::plain(8, 3, 2), StageSpec::plain(16, 3, 1), StageSpec::plain(24, 3, 2)],
                output_channels: 24,
                trainable_tail_layers: 3,
            },
            branch_b: BackboneConfig {
                name: "residual".into(),
                stages: vec![StageSpec::plain(16, 3, 2), StageSpec::skip(16, 3), StageSpec::plain(24, 3, 2)],
                output_channels: 24,
                trainable_tail_layers: 3,
            },
            se_ratio: 8,
            dense1_units: 32,
            dense1_dropout: 0.2,
            dense2_units: 16,
            dense2_dropout: 0.1,
            input_size: (input, input),
            seed,
        }
    }

    pub fn validate(&self) -> Result<()> {
        self.branch_a.validate(self.input_size)?;
        self.branch_b.validate(self.input_size)?;
        let a = self.branch_a.output_spatial(self.input_size.0, self.input_size.1);
        let b = self.branch_b.output_spatial(self.input_size.0, self.input_size.1);
        if a != b {
            return Err(ModelError::BranchSpatialMismatch { a, b });
        }
        if self.se_ratio == 0 {
            return Err(ModelError::InvalidConfig { reason: "se_ratio must be positive".into() });
        }
        if self.dense1_units == 0 || self.dense2_units == 0 {
            return Err(ModelError::InvalidConfig { reason: "dense units must be positive".into() });
        }
        for rate in [self.dense1_dropout, self.dense2_dropout] {
            if !(0.0..1.0).contains(&rate) {
                return Err(ModelError::InvalidConfig {
                    reason: format!("dropout rate {rate} outside [0, 1)"),
                });
            }
        }
        if self.input_size.0 == 0 || self.input_size.1 == 0 {
            return Err(ModelError::InvalidConfig { reason: "input size must be positive".into() });
        }
        Ok(())
    }

    /// Channel count after concatenating both branch outputs.
    pub fn fused_channels(&self) -> usize {
        self.branch_a.output_channels + self.branch_b.output_channels
    }
}
