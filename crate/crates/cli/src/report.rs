//! Artifact emission: metric tables, confusion matrices, curve CSVs and
//! SVG charts, plus the run manifest with content digests.

use crate::{CliError, Result};
use sefusion_core::train::{ConfusionMatrix, EpochPoint};
use std::fmt::Write as _;
use std::path::{Path, PathBuf};

/// One row of a metrics table; values are percentages.
#[derive(Debug, Clone, PartialEq)]
pub struct MetricsRow {
    pub label: String,
    pub accuracy: f64,
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
}

impl MetricsRow {
    pub fn new(label: impl Into<String>, values: (f64, f64, f64, f64)) -> Self {
        MetricsRow {
            label: label.into(),
            accuracy: values.0,
            precision: values.1,
            recall: values.2,
            f1: values.3,
        }
    }
}

fn io_err(path: &Path) -> impl FnOnce(std::io::Error) -> CliError + '_ {
    move |e| CliError::Config(format!("{}: {e}", path.display()))
}

/// `<first_column>,accuracy,precision,recall,f1` with two-decimal
/// percentages, the published table format.
pub fn write_metrics_csv(path: &Path, first_column: &str, rows: &[MetricsRow]) -> Result<()> {
    let mut out = format!("{first_column},accuracy,precision,recall,f1\n");
    for row in rows {
        let _ = writeln!(
            out,
            "{},{:.2},{:.2},{:.2},{:.2}",
            row.label, row.accuracy, row.precision, row.recall, row.f1
        );
    }
    std::fs::write(path, out).map_err(io_err(path))
}

/// Parse a metrics table back; the header is skipped.
pub fn read_metrics_csv(path: &Path) -> Result<Vec<MetricsRow>> {
    let text = std::fs::read_to_string(path).map_err(io_err(path))?;
    let mut rows = Vec::new();
    for (i, line) in text.lines().enumerate().skip(1) {
        if line.trim().is_empty() {
            continue;
        }
        let fields: Vec<&str> = line.split(',').collect();
        if fields.len() != 5 {
            return Err(CliError::Config(format!(
                "{}: line {} has {} fields, expected 5",
                path.display(),
                i + 1,
                fields.len()
            )));
        }
        let num = |s: &str| {
            s.parse::<f64>().map_err(|_| {
                CliError::Config(format!("{}: line {}: bad number {s:?}", path.display(), i + 1))
            })
        };
        rows.push(MetricsRow {
            label: fields[0].to_string(),
            accuracy: num(fields[1])?,
            precision: num(fields[2])?,
            recall: num(fields[3])?,
            f1: num(fields[4])?,
        });
    }
    Ok(rows)
}

/// 2x2 confusion matrix, actual in rows and predicted in columns.
pub fn write_confusion_csv(path: &Path, cm: &ConfusionMatrix) -> Result<()> {
    let out = format!(
        ",predicted_negative,predicted_positive\n\
         actual_negative,{},{}\n\
         actual_positive,{},{}\n",
        cm.true_neg, cm.false_pos, cm.false_neg, cm.true_pos
    );
    std::fs::write(path, out).map_err(io_err(path))
}

/// `epoch,train_loss,val_loss,train_acc,val_acc`, epochs 1-based.
pub fn write_curves_csv(path: &Path, curves: &[EpochPoint]) -> Result<()> {
    let mut out = String::from("epoch,train_loss,val_loss,train_acc,val_acc\n");
    for (i, p) in curves.iter().enumerate() {
        let _ = writeln!(
            out,
            "{},{:.6},{:.6},{:.6},{:.6}",
            i + 1,
            p.train_loss,
            p.val_loss,
            p.train_acc,
            p.val_acc
        );
    }
    std::fs::write(path, out).map_err(io_err(path))
}

pub fn read_curves_csv(path: &Path) -> Result<Vec<EpochPoint>> {
    let text = std::fs::read_to_string(path).map_err(io_err(path))?;
    let mut out = Vec::new();
    for (i, line) in text.lines().enumerate().skip(1) {
        if line.trim().is_empty() {
            continue;
        }
        let fields: Vec<&str> = line.split(',').collect();
        if fields.len() != 5 {
            return Err(CliError::Config(format!(
                "{}: line {}: expected 5 fields",
                path.display(),
                i + 1
            )));
        }
        let num = |s: &str| {
            s.parse::<f64>().map_err(|_| {
                CliError::Config(format!("{}: line {}: bad number {s:?}", path.display(), i + 1))
            })
        };
        out.push(EpochPoint {
            train_loss: num(fields[1])?,
            val_loss: num(fields[2])?,
            train_acc: num(fields[3])?,
            val_acc: num(fields[4])?,
        });
    }
    Ok(out)
}

/// Line chart of training and validation accuracy over epochs.
pub fn curves_svg(title: &str, curves: &[EpochPoint]) -> String {
    const W: f64 = 640.0;
    const H: f64 = 400.0;
    const LEFT: f64 = 60.0;
    const RIGHT: f64 = 620.0;
    const TOP: f64 = 40.0;
    const BOTTOM: f64 = 360.0;

    let x_of = |i: usize| {
        if curves.len() <= 1 {
            (LEFT + RIGHT) / 2.0
        } else {
            LEFT + (RIGHT - LEFT) * i as f64 / (curves.len() - 1) as f64
        }
    };
    let y_of = |acc: f64| BOTTOM - (BOTTOM - TOP) * acc.clamp(0.0, 1.0);
    let points = |pick: &dyn Fn(&EpochPoint) -> f64| {
        curves
            .iter()
            .enumerate()
            .map(|(i, p)| format!("{:.1},{:.1}", x_of(i), y_of(pick(p))))
            .collect::<Vec<_>>()
            .join(" ")
    };

    let mut svg = String::new();
    let _ = writeln!(svg, r#"<?xml version="1.0" encoding="UTF-8"?>"#);
    let _ = writeln!(
        svg,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{W}" height="{H}" viewBox="0 0 {W} {H}">"#
    );
    let _ = writeln!(svg, r#"  <rect x="0" y="0" width="{W}" height="{H}" fill="white"/>"#);
    let _ = writeln!(
        svg,
        r#"  <text x="{}" y="20" text-anchor="middle" font-family="sans-serif" font-size="14">{title}</text>"#,
        (LEFT + RIGHT) / 2.0
    );
    let _ = writeln!(
        svg,
        r#"  <line x1="{LEFT}" y1="{BOTTOM}" x2="{RIGHT}" y2="{BOTTOM}" stroke="black"/>"#
    );
    let _ = writeln!(
        svg,
        r#"  <line x1="{LEFT}" y1="{TOP}" x2="{LEFT}" y2="{BOTTOM}" stroke="black"/>"#
    );
    for tick in 0..=4 {
        let acc = tick as f64 / 4.0;
        let y = y_of(acc);
        let _ = writeln!(
            svg,
            r#"  <text x="{}" y="{:.1}" text-anchor="end" font-family="sans-serif" font-size="10">{acc:.2}</text>"#,
            LEFT - 6.0,
            y + 3.0
        );
    }
    let _ = writeln!(
        svg,
        r##"  <polyline fill="none" stroke="#1f77b4" stroke-width="1.5" points="{}"/>"##,
        points(&|p| p.train_acc)
    );
    let _ = writeln!(
        svg,
        r##"  <polyline fill="none" stroke="#d62728" stroke-width="1.5" points="{}"/>"##,
        points(&|p| p.val_acc)
    );
    let _ = writeln!(
        svg,
        r##"  <text x="{LEFT}" y="{}" font-family="sans-serif" font-size="11" fill="#1f77b4">training accuracy</text>"##,
        H - 22.0
    );
    let _ = writeln!(
        svg,
        r##"  <text x="{LEFT}" y="{}" font-family="sans-serif" font-size="11" fill="#d62728">validation accuracy</text>"##,
        H - 8.0
    );
    let _ = writeln!(svg, "</svg>");
    svg
}

/// Collects files written by a run and finishes with a digest manifest.
pub struct RunArtifacts {
    out_dir: PathBuf,
    files: Vec<PathBuf>,
}

impl RunArtifacts {
    /// Creates the output directory.
    pub fn new(out_dir: &Path) -> Result<Self> {
        std::fs::create_dir_all(out_dir).map_err(io_err(out_dir))?;
        Ok(RunArtifacts { out_dir: out_dir.to_path_buf(), files: Vec::new() })
    }

    pub fn out_dir(&self) -> &Path {
        &self.out_dir
    }

    /// Absolute path for a named artifact, recorded for the manifest.
    pub fn path(&mut self, name: &str) -> PathBuf {
        let path = self.out_dir.join(name);
        self.files.push(path.clone());
        path
    }

    pub fn file_count(&self) -> usize {
        self.files.len()
    }

    /// Write `manifest.txt`: `path,crc32` per artifact, sorted by path.
    pub fn finish(mut self) -> Result<PathBuf> {
        self.files.sort();
        let mut out = String::new();
        for file in &self.files {
            let bytes = std::fs::read(file).map_err(io_err(file))?;
            let digest = crc32fast::hash(&bytes);
            let name = file
                .strip_prefix(&self.out_dir)
                .unwrap_or(file)
                .to_string_lossy();
            let _ = writeln!(out, "{name},{digest:08x}");
        }
        let manifest = self.out_dir.join("manifest.txt");
        std::fs::write(&manifest, out).map_err(io_err(&manifest))?;
        Ok(manifest)
    }
}
