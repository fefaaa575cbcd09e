//! Re-render tables and charts from a completed run directory.

use crate::config::RunConfig;
use crate::report::{curves_svg, read_curves_csv, read_metrics_csv};
use crate::{config_err, CliError, Result};

pub fn cmd_report(cfg: &RunConfig) -> Result<()> {
    let dir = &cfg.out_dir;
    let metrics_path = dir.join("metrics.csv");
    if !metrics_path.is_file() {
        return Err(CliError::Config(format!(
            "{} does not look like a run directory (no metrics.csv)",
            dir.display()
        )));
    }

    let rows = read_metrics_csv(&metrics_path)?;
    println!("{:<8} {:>9} {:>10} {:>8} {:>9}", "fold", "accuracy", "precision", "recall", "f1");
    for row in &rows {
        println!(
            "{:<8} {:>9.2} {:>10.2} {:>8.2} {:>9.2}",
            row.label, row.accuracy, row.precision, row.recall, row.f1
        );
    }

    // Regenerate an SVG for every curve table present.
    let mut entries: Vec<_> = std::fs::read_dir(dir)
        .map_err(config_err)?
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| {
            p.file_name()
                .and_then(|n| n.to_str())
                .is_some_and(|n| n.starts_with("curves") && n.ends_with(".csv"))
        })
        .collect();
    entries.sort();
    for csv in entries {
        let curves = read_curves_csv(&csv)?;
        let svg_path = csv.with_extension("svg");
        let title = svg_path
            .file_stem()
            .and_then(|s| s.to_str())
            .unwrap_or("curves")
            .replace('_', " ");
        std::fs::write(&svg_path, curves_svg(&title, &curves)).map_err(config_err)?;
        println!("rewrote {}", svg_path.display());
    }
    Ok(())
}
