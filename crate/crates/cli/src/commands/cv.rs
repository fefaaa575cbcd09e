//! K-fold cross-validation, with a replay mode that re-aggregates recorded
//! fold metrics without training.

use super::{load_samples, pick, train_config};
use crate::config::RunConfig;
use crate::report::{
    curves_svg, read_metrics_csv, write_confusion_csv, write_curves_csv, write_metrics_csv,
    MetricsRow, RunArtifacts,
};
use crate::{config_err, CliError, Result};
use sefusion_core::data::{load_dataset, make_folds, stratified_split, write_plan, Grouping};
use sefusion_core::model::save_checkpoint;
use sefusion_core::train::{
    evaluate, kfold_cv, mean_of_folds, metrics, ConfusionMatrix, FoldReport, MeanReport,
};
use std::path::Path;

fn fold_row(report: &FoldReport) -> MetricsRow {
    MetricsRow::new(
        (report.fold + 1).to_string(),
        (report.accuracy, report.precision, report.recall, report.f1),
    )
}

fn mean_row(mean: &MeanReport) -> MetricsRow {
    MetricsRow::new("mean", (mean.accuracy, mean.precision, mean.recall, mean.f1))
}

/// Re-run the aggregation/formatting step over a recorded per-fold metrics
/// table.
fn replay(cfg: &RunConfig, recorded: &Path) -> Result<()> {
    let rows = read_metrics_csv(recorded)?;
    let folds: Vec<FoldReport> = rows
        .iter()
        .filter(|r| r.label != "mean")
        .enumerate()
        .map(|(i, r)| FoldReport {
            fold: i,
            accuracy: r.accuracy,
            precision: r.precision,
            recall: r.recall,
            f1: r.f1,
            degenerate: false,
            curves: Vec::new(),
            confusion: ConfusionMatrix::default(),
        })
        .collect();
    if folds.is_empty() {
        return Err(CliError::Config(format!("{}: no fold rows to replay", recorded.display())));
    }
    let mean = mean_of_folds(&folds);

    let mut artifacts = RunArtifacts::new(&cfg.out_dir)?;
    let mut out_rows: Vec<MetricsRow> = folds.iter().map(fold_row).collect();
    out_rows.push(mean_row(&mean));
    write_metrics_csv(&artifacts.path("metrics.csv"), "fold", &out_rows)?;
    for row in &out_rows {
        println!(
            "fold {}: accuracy {:.2} precision {:.2} recall {:.2} f1 {:.2}",
            row.label, row.accuracy, row.precision, row.recall, row.f1
        );
    }
    artifacts.finish()?;
    Ok(())
}

pub fn cmd_cv(cfg: &RunConfig) -> Result<()> {
    if let Some(recorded) = &cfg.replay {
        return replay(cfg, recorded);
    }
    if cfg.k < 2 {
        return Err(CliError::Config(format!("k-fold cross-validation needs k >= 2, got {}", cfg.k)));
    }
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
    let pool = split.pool();
    let folds = make_folds(&index, &pool, cfg.k, cfg.seed, Grouping::Auto).map_err(config_err)?;

    let mut artifacts = RunArtifacts::new(&cfg.out_dir)?;
    write_plan(&index, &split, Some(&folds), &artifacts.path("plan.csv")).map_err(config_err)?;

    let mut positions = pool.clone();
    positions.extend(&split.test);
    let store = load_samples(&index, &positions, cfg.input_size)?;
    let fold_sets: Vec<_> = (0..cfg.k)
        .map(|i| (pick(&store, &folds.train_of(i)), pick(&store, &folds.folds[i])))
        .collect();
    let test_set = pick(&store, &split.test);

    let base = cfg.model_config();
    let (outcome, models) =
        kfold_cv(&base, &fold_sets, &train_config(cfg), cfg.learning_rate).map_err(config_err)?;

    let mut rows: Vec<MetricsRow> = outcome.folds.iter().map(fold_row).collect();
    rows.push(mean_row(&outcome.mean));
    write_metrics_csv(&artifacts.path("metrics.csv"), "fold", &rows)?;

    for report in &outcome.folds {
        let i = report.fold;
        write_confusion_csv(&artifacts.path(&format!("confusion_fold{i}.csv")), &report.confusion)?;
        write_curves_csv(&artifacts.path(&format!("curves_fold{i}.csv")), &report.curves)?;
        std::fs::write(
            artifacts.path(&format!("curves_fold{i}.svg")),
            curves_svg(&format!("fold {}", i + 1), &report.curves),
        )
        .map_err(config_err)?;
        save_checkpoint(&models[i], &artifacts.path(&format!("fold{i}.sefn")))
            .map_err(config_err)?;
    }

    // Each fold's final model against the held-out test set.
    if !test_set.is_empty() {
        let mut test_rows = Vec::new();
        let mut test_reports = Vec::new();
        for (i, model) in models.iter().enumerate() {
            let cm = evaluate(model, &test_set).map_err(config_err)?;
            let m = metrics(&cm);
            test_reports.push(FoldReport {
                fold: i,
                accuracy: m.accuracy * 100.0,
                precision: m.precision * 100.0,
                recall: m.recall * 100.0,
                f1: m.f1 * 100.0,
                degenerate: m.degenerate,
                curves: Vec::new(),
                confusion: cm,
            });
        }
        test_rows.extend(test_reports.iter().map(fold_row));
        test_rows.push(mean_row(&mean_of_folds(&test_reports)));
        write_metrics_csv(&artifacts.path("test_metrics.csv"), "fold", &test_rows)?;
    }

    for row in &rows {
        println!(
            "fold {}: accuracy {:.2} precision {:.2} recall {:.2} f1 {:.2}",
            row.label, row.accuracy, row.precision, row.recall, row.f1
        );
    }
    artifacts.finish()?;
    Ok(())
}
