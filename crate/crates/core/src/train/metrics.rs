//! Confusion counts and derived classification metrics.

use super::Result;
use crate::model::FusionModel;
use crate::tensor::{Scalar, Tensor};

/// Counts from thresholded predictions; the positive class is label 1.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct ConfusionMatrix {
    pub true_pos: usize,
    pub true_neg: usize,
    pub false_pos: usize,
    pub false_neg: usize,
}

impl ConfusionMatrix {
    pub fn total(&self) -> usize {
        self.true_pos + self.true_neg + self.false_pos + self.false_neg
    }
}

/// Derived ratios in `[0,1]`. `degenerate` flags any zero-denominator case
/// that was defined to 0.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Metrics {
    pub accuracy: f64,
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
    pub degenerate: bool,
}

/// Tally labels against predictions.
pub fn tally_confusion(labels: &[u8], predictions: &[u8]) -> ConfusionMatrix {
    assert_eq!(labels.len(), predictions.len());
    let mut cm = ConfusionMatrix::default();
    for (&y, &p) in labels.iter().zip(predictions) {
        match (y, p) {
            (1, 1) => cm.true_pos += 1,
            (0, 0) => cm.true_neg += 1,
            (0, 1) => cm.false_pos += 1,
            (1, 0) => cm.false_neg += 1,
            _ => unreachable!("labels validated to be binary"),
        }
    }
    cm
}

/// Accuracy, precision, recall and F1 from counts. Zero-denominator cases
/// return 0 with the degenerate flag set, so rankings stay totally ordered.
pub fn metrics(cm: &ConfusionMatrix) -> Metrics {
    assert!(cm.total() >= 1, "metrics need at least one evaluated sample");
    let tp = cm.true_pos as f64;
    let mut degenerate = false;
    let mut ratio = |num: f64, den: f64| {
        if den == 0.0 {
            degenerate = true;
            0.0
        } else {
            num / den
        }
    };
    let accuracy = (tp + cm.true_neg as f64) / cm.total() as f64;
    let precision = ratio(tp, tp + cm.false_pos as f64);
    let recall = ratio(tp, tp + cm.false_neg as f64);
    let f1 = ratio(2.0 * precision * recall, precision + recall);
    Metrics { accuracy, precision, recall, f1, degenerate }
}

/// Run inference-mode prediction over a labelled set and tally counts.
pub fn evaluate<E: Scalar>(
    model: &FusionModel<E>,
    samples: &[(Tensor<E>, u8)],
) -> super::Result<ConfusionMatrix> {
    let predictions = predict_all(model, samples)?;
    let labels: Vec<u8> = samples.iter().map(|(_, l)| *l).collect();
    Ok(tally_confusion(&labels, &predictions))
}

/// Batched inference predictions for a labelled set.
pub fn predict_all<E: Scalar>(
    model: &FusionModel<E>,
    samples: &[(Tensor<E>, u8)],
) -> Result<Vec<u8>> {
    if samples.is_empty() {
        return Err(super::TrainError::EmptySet { which: "evaluation" });
    }
    let mut predictions = Vec::with_capacity(samples.len());
    for chunk in samples.chunks(32) {
        let tensors: Vec<Tensor<E>> = chunk.iter().map(|(t, _)| t.clone()).collect();
        let batch = Tensor::stack(&tensors)?;
        predictions.extend(model.predict(&batch)?);
    }
    Ok(predictions)
}
