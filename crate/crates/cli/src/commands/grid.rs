//! Exhaustive grid search over the dense-block hyperparameters.

use super::{load_samples, pick, train_config};
use crate::config::RunConfig;
use crate::report::RunArtifacts;
use crate::{config_err, Result};
use sefusion_core::data::{load_dataset, stratified_split, Grouping};
use sefusion_core::train::grid_search;
use std::fmt::Write as _;

pub fn cmd_grid(cfg: &RunConfig) -> Result<()> {
    let root = cfg.require_dataset()?;
    let index = load_dataset(root, &cfg.positive_class).map_err(config_err)?;
    let split =
        stratified_split(&index, cfg.ratios, cfg.seed, Grouping::Auto).map_err(config_err)?;

    let mut positions = split.train.clone();
    positions.extend(&split.val);
    let store = load_samples(&index, &positions, cfg.input_size)?;
    let train_set = pick(&store, &split.train);
    let val_set = pick(&store, &split.val);

    let base = cfg.model_config();
    let points = grid_search(&base, &cfg.grid, &train_set, &val_set, &train_config(cfg), cfg.learning_rate)
        .map_err(config_err)?;

    let mut artifacts = RunArtifacts::new(&cfg.out_dir)?;
    let mut out = String::from("rank,dense1_units,dense1_dropout,dense2_units,dense2_dropout,accuracy,f1\n");
    for (rank, p) in points.iter().enumerate() {
        let _ = writeln!(
            out,
            "{},{},{},{},{},{:.2},{:.2}",
            rank + 1,
            p.dense1_units,
            p.dense1_dropout,
            p.dense2_units,
            p.dense2_dropout,
            p.val_accuracy,
            p.f1
        );
    }
    std::fs::write(artifacts.path("grid.csv"), out).map_err(config_err)?;

    let best = &points[0];
    println!(
        "best: dense1 {}/{} dense2 {}/{} accuracy {:.2} f1 {:.2} ({} points)",
        best.dense1_units,
        best.dense1_dropout,
        best.dense2_units,
        best.dense2_dropout,
        best.val_accuracy,
        best.f1,
        points.len()
    );
    artifacts.finish()?;
    Ok(())
}
