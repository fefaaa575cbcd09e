//! K-fold cross-validation driver.

use super::adam::AdamState;
use super::metrics::{evaluate, metrics, ConfusionMatrix};
use super::trainer::{train, LabeledSet, TrainConfig};
use super::{worker_cap, Result, TrainError};
use crate::model::{FusionModel, FusionModelConfig};
use crate::tensor::Scalar;

/// One epoch of loss/accuracy curves (accuracies as fractions).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EpochPoint {
    pub train_loss: f64,
    pub train_acc: f64,
    pub val_loss: f64,
    pub val_acc: f64,
}

/// Per-fold outcome; metric fields are percentages.
#[derive(Debug, Clone, PartialEq)]
pub struct FoldReport {
    pub fold: usize,
    pub accuracy: f64,
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
    pub degenerate: bool,
    pub curves: Vec<EpochPoint>,
    pub confusion: ConfusionMatrix,
}

/// Arithmetic mean of per-fold percentages.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MeanReport {
    pub accuracy: f64,
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct CvOutcome {
    pub folds: Vec<FoldReport>,
    pub mean: MeanReport,
}

type FoldOutput<E> = Result<(FoldReport, FusionModel<E>)>;

/// Per-fold model seed: the master seed plus the fold index.
pub fn fold_seed(master: u64, fold: usize) -> u64 {
    master.wrapping_add(fold as u64)
}

/// Mean row over fold reports.
pub fn mean_of_folds(folds: &[FoldReport]) -> MeanReport {
    assert!(!folds.is_empty(), "mean of zero folds is undefined");
    let n = folds.len() as f64;
    MeanReport {
        accuracy: folds.iter().map(|f| f.accuracy).sum::<f64>() / n,
        precision: folds.iter().map(|f| f.precision).sum::<f64>() / n,
        recall: folds.iter().map(|f| f.recall).sum::<f64>() / n,
        f1: folds.iter().map(|f| f.f1).sum::<f64>() / n,
    }
}

/// Train a fresh model with the given seed and report fold metrics.
pub fn run_fold<E: Scalar>(
    base: &FusionModelConfig,
    seed: u64,
    fold: usize,
    train_set: &LabeledSet<E>,
    val_set: &LabeledSet<E>,
    train_cfg: &TrainConfig,
    learning_rate: f64,
) -> Result<(FoldReport, FusionModel<E>)> {
    let mut cfg = base.clone();
    cfg.seed = seed;
    let model = FusionModel::build(cfg)?;
    let mut optimizer = AdamState::new(learning_rate);
    let fold_train_cfg = TrainConfig { seed, ..*train_cfg };
    let curves = train(&model, &mut optimizer, train_set, val_set, &fold_train_cfg)?;
    let confusion = evaluate(&model, val_set)?;
    let m = metrics(&confusion);
    let report = FoldReport {
        fold,
        accuracy: m.accuracy * 100.0,
        precision: m.precision * 100.0,
        recall: m.recall * 100.0,
        f1: m.f1 * 100.0,
        degenerate: m.degenerate,
        curves,
        confusion,
    };
    Ok((report, model))
}

/// Train one fresh seeded model per fold (in parallel up to the worker
/// cap) and average the per-fold metrics. Fold `i` seeds its model with
/// `fold_seed(base.seed, i)`. Returns the reports plus each fold's final
/// model, merged in fold order.
pub fn kfold_cv<E: Scalar>(
    base: &FusionModelConfig,
    fold_sets: &[(LabeledSet<E>, LabeledSet<E>)],
    train_cfg: &TrainConfig,
    learning_rate: f64,
) -> Result<(CvOutcome, Vec<FusionModel<E>>)> {
    if fold_sets.is_empty() {
        return Err(TrainError::EmptySet { which: "fold" });
    }
    let workers = worker_cap(fold_sets.len());
    let mut slots: Vec<Option<FoldOutput<E>>> = (0..fold_sets.len()).map(|_| None).collect();

    std::thread::scope(|scope| {
        let mut pending: Vec<_> = fold_sets
            .iter()
            .zip(slots.iter_mut())
            .enumerate()
            .map(|(i, (sets, slot))| (i, sets, slot))
            .collect();
        while !pending.is_empty() {
            let wave: Vec<_> = pending.drain(..pending.len().min(workers)).collect();
            let mut handles = Vec::new();
            for (fold, (train_set, val_set), slot) in wave {
                handles.push(scope.spawn(move || {
                    *slot = Some(run_fold(
                        base,
                        fold_seed(base.seed, fold),
                        fold,
                        train_set,
                        val_set,
                        train_cfg,
                        learning_rate,
                    ));
                }));
            }
            for handle in handles {
                handle.join().expect("fold worker panicked");
            }
        }
    });

    let mut folds = Vec::with_capacity(slots.len());
    let mut models = Vec::with_capacity(slots.len());
    for (i, slot) in slots.into_iter().enumerate() {
        let (report, model) = slot
            .expect("every fold slot is filled")
            .map_err(|e| TrainError::TaskFailed { task: "fold", index: i, message: e.to_string() })?;
        folds.push(report);
        models.push(model);
    }
    let mean = mean_of_folds(&folds);
    Ok((CvOutcome { folds, mean }, models))
}
