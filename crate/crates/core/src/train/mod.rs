//! Loss, optimizer, training loop, metrics, cross-validation and grid
//! search.

mod adam;
mod cv;
mod grid;
mod loss;
mod metrics;
mod trainer;
#[cfg(test)]
mod tests;

pub use adam::AdamState;
pub use cv::{fold_seed, kfold_cv, mean_of_folds, run_fold, CvOutcome, EpochPoint, FoldReport, MeanReport};
pub use grid::{grid_seed, grid_search, rank_points, GridPoint, GridSpec};
pub use loss::bce_loss;
pub use metrics::{evaluate, metrics, tally_confusion, ConfusionMatrix, Metrics};
pub use trainer::{train, LabeledSet, TrainConfig};

use crate::model::ModelError;
use crate::tensor::TensorError;
use std::fmt;

/// Worker cap for fold- and grid-parallelism: the `SEFUSION_THREADS`
/// environment variable when set, otherwise the available parallelism.
pub fn worker_cap(tasks: usize) -> usize {
    let hw = std::thread::available_parallelism().map_or(1, |n| n.get());
    let cap = std::env::var("SEFUSION_THREADS")
        .ok()
        .and_then(|v| v.parse::<usize>().ok())
        .filter(|&n| n >= 1)
        .unwrap_or(hw);
    cap.min(tasks).max(1)
}

/// Errors raised during training and evaluation.
#[derive(Debug)]
pub enum TrainError {
    Model(ModelError),
    Tensor(TensorError),
    /// A gradient-tracked parameter had no gradient at optimizer time.
    MissingGradient { name: String },
    /// Loss left the finite range; training aborts with context.
    NonFiniteLoss { epoch: usize, batch: usize },
    /// A training or evaluation set was empty.
    EmptySet { which: &'static str },
    /// A label other than 0 or 1.
    InvalidLabel { value: u8 },
    /// A grid value outside the admissible tuning sets.
    BadGridValue { what: String },
    /// A fold or grid worker failed; the index identifies which.
    TaskFailed { task: &'static str, index: usize, message: String },
}

impl fmt::Display for TrainError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Self::Model(e) => e.fmt(f),
            Self::Tensor(e) => e.fmt(f),
            Self::MissingGradient { name } => {
                write!(f, "trainable parameter {name} has no gradient")
            }
            Self::NonFiniteLoss { epoch, batch } => {
                write!(f, "loss became non-finite at epoch {epoch}, batch {batch}")
            }
            Self::EmptySet { which } => write!(f, "{which} set is empty"),
            Self::InvalidLabel { value } => write!(f, "label {value} is not binary"),
            Self::BadGridValue { what } => write!(f, "grid value outside tuning sets: {what}"),
            Self::TaskFailed { task, index, message } => {
                write!(f, "{task} {index} failed: {message}")
            }
        }
    }
}

impl std::error::Error for TrainError {}

impl From<ModelError> for TrainError {
    fn from(e: ModelError) -> Self {
        TrainError::Model(e)
    }
}

impl From<TensorError> for TrainError {
    fn from(e: TensorError) -> Self {
        TrainError::Tensor(e)
    }
}

pub type Result<T> = std::result::Result<T, TrainError>;
