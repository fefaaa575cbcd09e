//! Mini-batch training loop.

use super::adam::AdamState;
use super::cv::EpochPoint;
use super::loss::bce_loss;
use super::metrics::{predict_all, tally_confusion};
use super::{Result, TrainError};
use crate::model::{labels_from_probs, FusionModel};
use crate::tensor::{Mode, Scalar, Tape, Tensor};
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// Samples as `[3,h,w]` tensors with binary labels.
pub type LabeledSet<E> = Vec<(Tensor<E>, u8)>;

#[derive(Debug, Clone, Copy)]
pub struct TrainConfig {
    pub epochs: usize,
    pub batch_size: usize,
    pub seed: u64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig { epochs: 50, batch_size: 32, seed: 0 }
    }
}

fn validate_labels<E: Scalar>(set: &LabeledSet<E>) -> Result<()> {
    for (_, label) in set {
        if *label > 1 {
            return Err(TrainError::InvalidLabel { value: *label });
        }
    }
    Ok(())
}

/// Epochs of shuffled mini-batch updates; the final model is the
/// last-epoch model. Returns per-epoch loss/accuracy curves for both sets.
///
/// One seeded generator drives shuffling and dropout, so a `(model seed,
/// train seed, data order)` triple fully determines the trajectory.
pub fn train<E: Scalar>(
    model: &FusionModel<E>,
    optimizer: &mut AdamState<E>,
    train_set: &LabeledSet<E>,
    val_set: &LabeledSet<E>,
    cfg: &TrainConfig,
) -> Result<Vec<EpochPoint>> {
    if train_set.is_empty() {
        return Err(TrainError::EmptySet { which: "training" });
    }
    if val_set.is_empty() {
        return Err(TrainError::EmptySet { which: "validation" });
    }
    validate_labels(train_set)?;
    validate_labels(val_set)?;

    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let params = model.named_parameters();
    let mut curves = Vec::with_capacity(cfg.epochs);

    for epoch in 0..cfg.epochs {
        let mut order: Vec<usize> = (0..train_set.len()).collect();
        order.shuffle(&mut rng);
        let mut batches: Vec<Vec<usize>> =
            order.chunks(cfg.batch_size.max(1)).map(<[usize]>::to_vec).collect();
        // Batch statistics need two samples; fold a trailing singleton into
        // the previous batch.
        if batches.len() > 1 && batches.last().is_some_and(|b| b.len() == 1) {
            let last = batches.pop().expect("non-empty");
            batches.last_mut().expect("non-empty").extend(last);
        }

        let mut loss_sum = 0.0f64;
        let mut correct = 0usize;
        for (batch_no, batch_idx) in batches.iter().enumerate() {
            let tensors: Vec<Tensor<E>> =
                batch_idx.iter().map(|&i| train_set[i].0.clone()).collect();
            let labels: Vec<u8> = batch_idx.iter().map(|&i| train_set[i].1).collect();
            let batch = Tensor::stack(&tensors)?;

            let mut tape = Tape::new();
            let probs = model.forward(&mut tape, &batch, Mode::Training, &mut rng)?;
            let loss = bce_loss(&mut tape, &labels, &probs)?;
            let loss_value = loss.item().to_f64();
            if !loss_value.is_finite() {
                return Err(TrainError::NonFiniteLoss { epoch, batch: batch_no });
            }
            tape.backward(&loss)?;
            optimizer.step(&params)?;
            model.zero_grads();

            loss_sum += loss_value * labels.len() as f64;
            for (p, y) in labels_from_probs(&probs.to_vec()).iter().zip(&labels) {
                correct += usize::from(p == y);
            }
        }

        let (val_loss, val_acc) = evaluate_loss_acc(model, val_set)?;
        curves.push(EpochPoint {
            train_loss: loss_sum / train_set.len() as f64,
            train_acc: correct as f64 / train_set.len() as f64,
            val_loss,
            val_acc,
        });
    }
    Ok(curves)
}

/// Inference-mode mean loss and accuracy over a labelled set.
pub fn evaluate_loss_acc<E: Scalar>(
    model: &FusionModel<E>,
    set: &LabeledSet<E>,
) -> Result<(f64, f64)> {
    if set.is_empty() {
        return Err(TrainError::EmptySet { which: "evaluation" });
    }
    let mut loss_sum = 0.0f64;
    for chunk in set.chunks(32) {
        let tensors: Vec<Tensor<E>> = chunk.iter().map(|(t, _)| t.clone()).collect();
        let labels: Vec<u8> = chunk.iter().map(|(_, l)| *l).collect();
        let batch = Tensor::stack(&tensors)?;
        let mut tape = Tape::inference();
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let probs = model.forward(&mut tape, &batch, Mode::Inference, &mut rng)?;
        let loss = bce_loss(&mut tape, &labels, &probs)?;
        loss_sum += loss.item().to_f64() * labels.len() as f64;
    }
    let predictions = predict_all(model, set)?;
    let labels: Vec<u8> = set.iter().map(|(_, l)| *l).collect();
    let cm = tally_confusion(&labels, &predictions);
    let acc = (cm.true_pos + cm.true_neg) as f64 / cm.total() as f64;
    Ok((loss_sum / set.len() as f64, acc))
}
