//! Single train/validation/test run.

use super::{load_samples, pick, train_config};
use crate::config::RunConfig;
use crate::report::{
    curves_svg, write_confusion_csv, write_curves_csv, write_metrics_csv, MetricsRow, RunArtifacts,
};
use crate::{config_err, Result};
use sefusion_core::data::{load_dataset, stratified_split, write_plan, Grouping};
use sefusion_core::model::{save_checkpoint, FusionModel};
use sefusion_core::train::{evaluate, metrics, train, AdamState};

pub fn cmd_train(cfg: &RunConfig) -> Result<()> {
    let root = cfg.require_dataset()?;
    let index = load_dataset(root, &cfg.positive_class).map_err(config_err)?;
    for warning in &index.skipped {
        eprintln!("warning: {warning}");
    }
    println!(
        "dataset: {} images ({} {} / {} others)",
        index.len(),
        index.count(1),
        cfg.positive_class,
        index.count(0)
    );
    let split =
        stratified_split(&index, cfg.ratios, cfg.seed, Grouping::Auto).map_err(config_err)?;

    let mut artifacts = RunArtifacts::new(&cfg.out_dir)?;
    write_plan(&index, &split, None, &artifacts.path("plan.csv")).map_err(config_err)?;

    let mut positions = split.train.clone();
    positions.extend(&split.val);
    positions.extend(&split.test);
    let store = load_samples(&index, &positions, cfg.input_size)?;
    let train_set = pick(&store, &split.train);
    let val_set = pick(&store, &split.val);
    let test_set = pick(&store, &split.test);

    let model = FusionModel::<f32>::build(cfg.model_config()).map_err(config_err)?;
    let (total, trainable) = model.parameter_count();
    println!("model: {total} parameters, {trainable} trainable");

    let mut optimizer = AdamState::new(cfg.learning_rate);
    let curves =
        train(&model, &mut optimizer, &train_set, &val_set, &train_config(cfg)).map_err(config_err)?;

    let val_cm = evaluate(&model, &val_set).map_err(config_err)?;
    let test_cm = evaluate(&model, &test_set).map_err(config_err)?;
    let as_row = |label: &str, cm: &sefusion_core::train::ConfusionMatrix| {
        let m = metrics(cm);
        MetricsRow::new(label, (m.accuracy * 100.0, m.precision * 100.0, m.recall * 100.0, m.f1 * 100.0))
    };
    let rows = vec![as_row("val", &val_cm), as_row("test", &test_cm)];
    write_metrics_csv(&artifacts.path("metrics.csv"), "subset", &rows)?;
    write_confusion_csv(&artifacts.path("confusion_val.csv"), &val_cm)?;
    write_confusion_csv(&artifacts.path("confusion_test.csv"), &test_cm)?;
    write_curves_csv(&artifacts.path("curves.csv"), &curves)?;
    std::fs::write(artifacts.path("curves.svg"), curves_svg("training run", &curves))
        .map_err(config_err)?;
    save_checkpoint(&model, &artifacts.path("model.sefn")).map_err(config_err)?;

    for row in &rows {
        println!(
            "{}: accuracy {:.2} precision {:.2} recall {:.2} f1 {:.2}",
            row.label, row.accuracy, row.precision, row.recall, row.f1
        );
    }
    let manifest = artifacts.finish()?;
    println!("artifacts written to {}", manifest.parent().unwrap_or(&cfg.out_dir).display());
    Ok(())
}
