//! Subcommand implementations.

mod augment;
mod cv;
mod gradcheck;
mod grid;
mod report;
mod train;

pub use augment::cmd_augment;
pub use cv::cmd_cv;
pub use gradcheck::{cmd_gradcheck, run_checks};
pub use grid::cmd_grid;
pub use report::cmd_report;
pub use train::cmd_train;

use crate::config::RunConfig;
use crate::{config_err, Result};
use sefusion_core::data::{preprocess, DatasetIndex};
use sefusion_core::train::LabeledSet;
use std::collections::BTreeMap;

/// Decode and preprocess the samples at the given index positions,
/// keyed by position so plans can pick them out cheaply.
pub(crate) fn load_samples(
    index: &DatasetIndex,
    positions: &[usize],
    size: (usize, usize),
) -> Result<BTreeMap<usize, (sefusion_core::tensor::Tensor<f32>, u8)>> {
    let mut out = BTreeMap::new();
    for &pos in positions {
        let image = index.decode(pos).map_err(config_err)?;
        let tensor = preprocess(&image, size.0, size.1).map_err(config_err)?;
        out.insert(pos, (tensor, index.entries[pos].label));
    }
    Ok(out)
}

pub(crate) fn pick(
    store: &BTreeMap<usize, (sefusion_core::tensor::Tensor<f32>, u8)>,
    positions: &[usize],
) -> LabeledSet<f32> {
    positions
        .iter()
        .map(|p| {
            let (t, l) = &store[p];
            (t.clone(), *l)
        })
        .collect()
}

pub(crate) fn train_config(cfg: &RunConfig) -> sefusion_core::train::TrainConfig {
    sefusion_core::train::TrainConfig {
        epochs: cfg.epochs,
        batch_size: cfg.batch_size,
        seed: cfg.seed,
    }
}
