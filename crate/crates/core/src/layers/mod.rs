//! Parameterized layers: dense, batch normalization, inverted dropout and
//! the squeeze-and-excitation channel-attention block.
//!
//! Parameter sets are shareable read-only across threads during evaluation;
//! the optimizer step and batch-norm running statistics are the only
//! mutation points.

mod batchnorm;
mod dense;
mod dropout;
mod init;
mod se;

pub use batchnorm::BatchNormParams;
pub use dense::DenseParams;
pub use dropout::DropoutSpec;
pub use init::uniform_fan_in;
pub use se::SEBlockParams;

use crate::tensor::TensorError;
use std::fmt;

/// Errors raised while constructing or applying layers.
#[derive(Debug, Clone, PartialEq)]
pub enum LayerError {
    Tensor(TensorError),
    /// Channel count is not divisible by the (fallback-adjusted) reduction
    /// ratio.
    ReductionMismatch { channels: usize, ratio: usize },
    /// Dropout rate outside `[0, 1)`.
    InvalidDropoutRate { rate: f64 },
    /// A layer dimension that must be at least 1 was 0.
    EmptyDimension { what: &'static str },
}

impl fmt::Display for LayerError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Self::Tensor(e) => e.fmt(f),
            Self::ReductionMismatch { channels, ratio } => {
                write!(f, "reduction ratio {ratio} does not divide {channels} channels")
            }
            Self::InvalidDropoutRate { rate } => {
                write!(f, "dropout rate {rate} outside [0, 1)")
            }
            Self::EmptyDimension { what } => write!(f, "{what} must be at least 1"),
        }
    }
}

impl std::error::Error for LayerError {}

impl From<TensorError> for LayerError {
    fn from(e: TensorError) -> Self {
        LayerError::Tensor(e)
    }
}

pub type Result<T> = std::result::Result<T, LayerError>;
