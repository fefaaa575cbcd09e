//! The dual-branch fusion classifier: two convolutional feature extractors
//! with per-branch squeeze-and-excitation blocks, channel concatenation,
//! two dense blocks and a single-unit sigmoid head.

mod backbone;
mod checkpoint;
mod config;
mod fusion;

pub use backbone::{Backbone, ConvStage};
pub use checkpoint::{load_checkpoint, save_checkpoint, CheckpointError};
pub use config::{BackboneConfig, FusionModelConfig, StageSpec};
pub use fusion::{labels_from_probs, Branch, FusionModel};

use crate::layers::LayerError;
use crate::tensor::TensorError;
use std::fmt;

/// Errors raised while validating configs, building or running the model.
#[derive(Debug)]
pub enum ModelError {
    Tensor(TensorError),
    Layer(LayerError),
    /// The two branch outputs disagree on spatial extent, so their feature
    /// maps cannot be concatenated.
    BranchSpatialMismatch { a: (usize, usize), b: (usize, usize) },
    /// A backbone's declared output channel count differs from its final
    /// stage.
    OutputChannelMismatch { declared: usize, actual: usize },
    /// More tail layers requested than the branch has parameterized layers.
    TailOutOfRange { requested: usize, available: usize },
    /// Input batch does not match the configured input size.
    InputMismatch { expected: Vec<usize>, actual: Vec<usize> },
    /// A structural configuration problem, described in the message.
    InvalidConfig { reason: String },
}

impl fmt::Display for ModelError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Self::Tensor(e) => e.fmt(f),
            Self::Layer(e) => e.fmt(f),
            Self::BranchSpatialMismatch { a, b } => write!(
                f,
                "branch output spatial sizes differ: {}x{} vs {}x{}",
                a.0, a.1, b.0, b.1
            ),
            Self::OutputChannelMismatch { declared, actual } => write!(
                f,
                "backbone declares {declared} output channels but its last stage has {actual}"
            ),
            Self::TailOutOfRange { requested, available } => write!(
                f,
                "cannot unfreeze {requested} tail layers, branch has {available}"
            ),
            Self::InputMismatch { expected, actual } => {
                write!(f, "input batch shape {actual:?} does not match configured {expected:?}")
            }
            Self::InvalidConfig { reason } => write!(f, "invalid model config: {reason}"),
        }
    }
}

impl std::error::Error for ModelError {}

impl From<TensorError> for ModelError {
    fn from(e: TensorError) -> Self {
        ModelError::Tensor(e)
    }
}

impl From<LayerError> for ModelError {
    fn from(e: LayerError) -> Self {
        ModelError::Layer(e)
    }
}

pub type Result<T> = std::result::Result<T, ModelError>;
