//! Exhaustive, deterministic hyperparameter grid search over the dense
//! blocks.

use super::cv::run_fold;
use super::trainer::{LabeledSet, TrainConfig};
use super::{worker_cap, Result, TrainError};
use crate::model::FusionModelConfig;
use crate::tensor::Scalar;

const UNIT_CHOICES: [usize; 4] = [32, 64, 128, 256];
const DROPOUT_CHOICES: [f64; 2] = [0.1, 0.2];

/// Candidate sets for both dense blocks. The admissible values are fixed:
/// units from {32, 64, 128, 256}, dropout from {0.1, 0.2}.
#[derive(Debug, Clone, PartialEq)]
pub struct GridSpec {
    pub dense1_units: Vec<usize>,
    pub dense1_dropout: Vec<f64>,
    pub dense2_units: Vec<usize>,
    pub dense2_dropout: Vec<f64>,
}

impl Default for GridSpec {
    fn default() -> Self {
        GridSpec {
            dense1_units: UNIT_CHOICES.to_vec(),
            dense1_dropout: DROPOUT_CHOICES.to_vec(),
            dense2_units: UNIT_CHOICES.to_vec(),
            dense2_dropout: DROPOUT_CHOICES.to_vec(),
        }
    }
}

impl GridSpec {
    pub fn validate(&self) -> Result<()> {
        let bad = |what: String| Err(TrainError::BadGridValue { what });
        for list in [&self.dense1_units, &self.dense2_units] {
            if list.is_empty() {
                return bad("empty units list".into());
            }
            for &u in list {
                if !UNIT_CHOICES.contains(&u) {
                    return bad(format!("units {u}"));
                }
            }
        }
        for list in [&self.dense1_dropout, &self.dense2_dropout] {
            if list.is_empty() {
                return bad("empty dropout list".into());
            }
            for &d in list {
                if !DROPOUT_CHOICES.contains(&d) {
                    return bad(format!("dropout {d}"));
                }
            }
        }
        Ok(())
    }

    /// Every combination in lexicographic order.
    pub fn points(&self) -> Vec<(usize, f64, usize, f64)> {
        let mut out = Vec::new();
        for &u1 in &self.dense1_units {
            for &d1 in &self.dense1_dropout {
                for &u2 in &self.dense2_units {
                    for &d2 in &self.dense2_dropout {
                        out.push((u1, d1, u2, d2));
                    }
                }
            }
        }
        out
    }
}

/// One evaluated configuration; metric fields are percentages.
#[derive(Debug, Clone, PartialEq)]
pub struct GridPoint {
    pub dense1_units: usize,
    pub dense1_dropout: f64,
    pub dense2_units: usize,
    pub dense2_dropout: f64,
    pub val_accuracy: f64,
    pub f1: f64,
}

/// Per-point model seed: master + 1000 + point index.
pub fn grid_seed(master: u64, point: usize) -> u64 {
    master.wrapping_add(1000).wrapping_add(point as u64)
}

/// Sort by validation accuracy, ties by F1, remaining ties by the
/// lexicographic enumeration order of the configs.
pub fn rank_points(points: &mut [GridPoint]) {
    points.sort_by(|a, b| {
        b.val_accuracy
            .partial_cmp(&a.val_accuracy)
            .expect("metrics are finite")
            .then(b.f1.partial_cmp(&a.f1).expect("metrics are finite"))
            .then_with(|| {
                let ka = (a.dense1_units, a.dense1_dropout.to_bits(), a.dense2_units, a.dense2_dropout.to_bits());
                let kb = (b.dense1_units, b.dense1_dropout.to_bits(), b.dense2_units, b.dense2_dropout.to_bits());
                ka.cmp(&kb)
            })
    });
}

/// Evaluate every grid point on the same data with per-point derived
/// seeds, in parallel up to the worker cap, and return the ranked list.
pub fn grid_search<E: Scalar>(
    base: &FusionModelConfig,
    grid: &GridSpec,
    train_set: &LabeledSet<E>,
    val_set: &LabeledSet<E>,
    train_cfg: &TrainConfig,
    learning_rate: f64,
) -> Result<Vec<GridPoint>> {
    grid.validate()?;
    let combos = grid.points();
    let workers = worker_cap(combos.len());
    let mut slots: Vec<Option<Result<GridPoint>>> = (0..combos.len()).map(|_| None).collect();

    std::thread::scope(|scope| {
        let mut pending: Vec<_> = combos
            .iter()
            .zip(slots.iter_mut())
            .enumerate()
            .map(|(i, (combo, slot))| (i, combo, slot))
            .collect();
        while !pending.is_empty() {
            let wave: Vec<_> = pending.drain(..pending.len().min(workers)).collect();
            let mut handles = Vec::new();
            for (index, &(u1, d1, u2, d2), slot) in wave {
                handles.push(scope.spawn(move || {
                    let mut cfg = base.clone();
                    cfg.dense1_units = u1;
                    cfg.dense1_dropout = d1;
                    cfg.dense2_units = u2;
                    cfg.dense2_dropout = d2;
                    let result = run_fold(
                        &cfg,
                        grid_seed(base.seed, index),
                        index,
                        train_set,
                        val_set,
                        train_cfg,
                        learning_rate,
                    )
                    .map(|(report, _)| GridPoint {
                        dense1_units: u1,
                        dense1_dropout: d1,
                        dense2_units: u2,
                        dense2_dropout: d2,
                        val_accuracy: report.accuracy,
                        f1: report.f1,
                    });
                    *slot = Some(result);
                }));
            }
            for handle in handles {
                handle.join().expect("grid worker panicked");
            }
        }
    });

    let mut points = Vec::with_capacity(slots.len());
    for (i, slot) in slots.into_iter().enumerate() {
        points.push(slot.expect("every grid slot is filled").map_err(|e| {
            TrainError::TaskFailed { task: "grid point", index: i, message: e.to_string() }
        })?);
    }
    rank_points(&mut points);
    Ok(points)
}
