use super::*;
use crate::model::{Branch, FusionModel, FusionModelConfig};
use crate::tensor::{Tape, Tensor};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn desk_model(seed: u64) -> FusionModel<f32> {
    FusionModel::build(FusionModelConfig::desk_scale(8, seed)).unwrap()
}

/// Brightness-separable synthetic set: positives bright, negatives dark.
fn separable_set(n: usize, hw: usize, seed: u64) -> LabeledSet<f32> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..n)
        .map(|i| {
            let label = (i % 2) as u8;
            let (lo, hi) = if label == 1 { (0.6, 0.9) } else { (0.1, 0.4) };
            let data = (0..3 * hw * hw).map(|_| rng.gen_range(lo..hi)).collect();
            (Tensor::new(data, &[3, hw, hw]).unwrap(), label)
        })
        .collect()
}

// ── bce ─────────────────────────────────────────────────────────────────

#[test]
fn bce_at_even_odds_is_ln_two() {
    let mut tape = Tape::<f32>::inference();
    let p = Tensor::new(vec![0.5f32], &[1]).unwrap();
    let loss = bce_loss(&mut tape, &[1], &p).unwrap();
    assert!((loss.item() - std::f32::consts::LN_2).abs() < 1e-6);
}

#[test]
fn bce_vanishes_for_confident_correct_prediction() {
    let mut tape = Tape::<f32>::inference();
    let p = Tensor::new(vec![1.0f32], &[1]).unwrap();
    let loss = bce_loss(&mut tape, &[1], &p).unwrap();
    assert!(loss.item() >= 0.0 && loss.item() <= 1e-6);
}

#[test]
fn bce_matches_per_sample_oracle() {
    let mut rng = ChaCha8Rng::seed_from_u64(31);
    let n = 64;
    let labels: Vec<u8> = (0..n).map(|_| rng.gen_range(0..=1)).collect();
    let probs: Vec<f64> = (0..n).map(|_| rng.gen_range(0.05..0.95)).collect();

    let mut expect = 0.0f64;
    for (&y, &p) in labels.iter().zip(&probs) {
        let y = y as f64;
        expect -= y * p.ln() + (1.0 - y) * (1.0 - p).ln();
    }
    expect /= n as f64;

    let mut tape = Tape::<f64>::inference();
    let p = Tensor::new(probs, &[n]).unwrap();
    let loss = bce_loss(&mut tape, &labels, &p).unwrap();
    assert!((loss.item() - expect).abs() < 1e-6);
}

#[test]
fn bce_gradient_matches_finite_differences_away_from_clip() {
    let probs = Tensor::<f64>::new(vec![0.2, 0.5, 0.8, 0.35], &[4]).unwrap();
    let labels = [1u8, 0, 1, 0];
    let err = crate::tensor::finite_diff_check(
        |tape: &mut Tape<f64>, p: &Tensor<f64>| {
            bce_loss(tape, &labels, p).map_err(|_| crate::tensor::TensorError::NonFinite { op: "bce" })
        },
        &probs,
        1e-4,
    )
    .unwrap();
    assert!(err < 1e-6, "bce gradient error {err}");
}

#[test]
fn bce_rejects_non_binary_labels() {
    let mut tape = Tape::<f32>::inference();
    let p = Tensor::new(vec![0.5f32], &[1]).unwrap();
    assert!(matches!(
        bce_loss(&mut tape, &[2], &p),
        Err(TrainError::InvalidLabel { value: 2 })
    ));
}

// ── adam ────────────────────────────────────────────────────────────────

#[test]
fn adam_zero_gradient_leaves_parameters_unchanged() {
    let p = Tensor::new(vec![1.0f32, -2.0, 3.0], &[3]).unwrap().tracked();
    p.accumulate_grad(&[0.0, 0.0, 0.0]);
    let mut adam = AdamState::<f32>::new(0.01);
    adam.step(&[("p".into(), p.clone())]).unwrap();
    assert_eq!(p.to_vec(), vec![1.0, -2.0, 3.0]);
}

#[test]
fn adam_first_step_moves_by_the_learning_rate() {
    let p = Tensor::new(vec![1.0f32; 4], &[4]).unwrap().tracked();
    p.accumulate_grad(&[0.5; 4]);
    let lr = 0.001;
    let mut adam = AdamState::<f32>::new(lr);
    adam.step(&[("p".into(), p.clone())]).unwrap();
    for v in p.to_vec() {
        let delta = (1.0 - v) as f64;
        assert!((delta - lr).abs() / lr < 0.01, "first step moved {delta}, expected ~{lr}");
    }
}

#[test]
fn adam_requires_gradients_for_trainable_parameters() {
    let p = Tensor::new(vec![1.0f32], &[1]).unwrap().tracked();
    let mut adam = AdamState::<f32>::new(0.01);
    let err = adam.step(&[("w".into(), p)]).unwrap_err();
    match err {
        TrainError::MissingGradient { name } => assert_eq!(name, "w"),
        other => panic!("unexpected error {other}"),
    }
}

#[test]
fn adam_skips_frozen_parameters() {
    let frozen = Tensor::new(vec![5.0f32], &[1]).unwrap();
    frozen.set_requires_grad(false);
    let mut adam = AdamState::<f32>::new(0.1);
    adam.step(&[("frozen".into(), frozen.clone())]).unwrap();
    assert_eq!(frozen.to_vec(), vec![5.0]);
}

// ── training loop ───────────────────────────────────────────────────────

#[test]
fn zero_epochs_changes_nothing() {
    let model = desk_model(1);
    let before: Vec<Vec<f32>> = model.named_tensors().iter().map(|(_, t)| t.to_vec()).collect();
    let set = separable_set(8, 8, 1);
    let mut adam = AdamState::new(0.001);
    let cfg = TrainConfig { epochs: 0, batch_size: 4, seed: 1 };
    let curves = train(&model, &mut adam, &set, &set, &cfg).unwrap();
    assert!(curves.is_empty());
    let after: Vec<Vec<f32>> = model.named_tensors().iter().map(|(_, t)| t.to_vec()).collect();
    assert_eq!(before, after);
}

#[test]
fn identical_seeds_give_bit_identical_trajectories() {
    let run = || {
        let model = desk_model(11);
        let set = separable_set(8, 8, 2);
        let mut adam = AdamState::new(0.005);
        let cfg = TrainConfig { epochs: 3, batch_size: 4, seed: 7 };
        let curves = train(&model, &mut adam, &set, &set, &cfg).unwrap();
        let params: Vec<Vec<f32>> = model.named_tensors().iter().map(|(_, t)| t.to_vec()).collect();
        (curves, params)
    };
    let (curves_a, params_a) = run();
    let (curves_b, params_b) = run();
    assert_eq!(curves_a, curves_b);
    assert_eq!(params_a, params_b);
}

#[test]
fn fully_frozen_model_has_constant_validation_metrics() {
    let model = desk_model(3);
    for (_, p) in model.named_parameters() {
        p.set_requires_grad(false);
    }
    let set = separable_set(8, 8, 3);
    let mut adam = AdamState::new(0.01);
    let cfg = TrainConfig { epochs: 3, batch_size: 4, seed: 5 };
    let curves = train(&model, &mut adam, &set, &set, &cfg).unwrap();
    for point in &curves[1..] {
        assert_eq!(point.val_loss, curves[0].val_loss);
        assert_eq!(point.val_acc, curves[0].val_acc);
    }
}

#[test]
fn frozen_branches_stay_bit_identical_under_training() {
    let mut model = desk_model(4);
    model.set_trainable_tail(Branch::A, 0).unwrap();
    model.set_trainable_tail(Branch::B, 0).unwrap();
    let branch_state = |m: &FusionModel<f32>| -> Vec<Vec<f32>> {
        m.named_tensors()
            .iter()
            .filter(|(n, _)| n.starts_with("branch_"))
            .map(|(_, t)| t.to_vec())
            .collect()
    };
    let head_state = |m: &FusionModel<f32>| -> Vec<f32> {
        m.named_parameters()
            .iter()
            .find(|(n, _)| n == "head.weight")
            .map(|(_, t)| t.to_vec())
            .unwrap()
    };
    let frozen_before = branch_state(&model);
    let head_before = head_state(&model);

    let set = separable_set(8, 8, 4);
    let mut adam = AdamState::new(0.01);
    let cfg = TrainConfig { epochs: 2, batch_size: 4, seed: 9 };
    train(&model, &mut adam, &set, &set, &cfg).unwrap();

    assert_eq!(branch_state(&model), frozen_before);
    assert_ne!(head_state(&model), head_before);
}

#[test]
fn separable_task_is_learned_quickly() {
    let model = desk_model(5);
    let set = separable_set(8, 8, 6);
    let mut adam = AdamState::new(0.01);
    let cfg = TrainConfig { epochs: 60, batch_size: 4, seed: 3 };
    let curves = train(&model, &mut adam, &set, &set, &cfg).unwrap();
    let best = curves.iter().map(|p| p.train_acc).fold(0.0, f64::max);
    assert_eq!(best, 1.0, "never reached full training accuracy: {best}");
    assert!(curves.last().unwrap().train_loss < curves[0].train_loss);
}

// ── metrics ─────────────────────────────────────────────────────────────

#[test]
fn perfect_counts_give_perfect_metrics() {
    let cm = ConfusionMatrix { true_pos: 5, true_neg: 5, false_pos: 0, false_neg: 0 };
    let m = metrics(&cm);
    assert_eq!((m.accuracy, m.precision, m.recall, m.f1), (1.0, 1.0, 1.0, 1.0));
    assert!(!m.degenerate);
}

#[test]
fn metrics_direct_arithmetic() {
    let cm = ConfusionMatrix { true_pos: 3, false_pos: 1, false_neg: 1, true_neg: 5 };
    let m = metrics(&cm);
    assert!((m.precision - 0.75).abs() < 1e-12);
    assert!((m.recall - 0.75).abs() < 1e-12);
    assert!((m.f1 - 0.75).abs() < 1e-12);
    assert!((m.accuracy - 0.8).abs() < 1e-12);
}

#[test]
fn zero_denominator_metrics_are_zero_and_flagged() {
    let cm = ConfusionMatrix { true_pos: 0, false_pos: 0, false_neg: 2, true_neg: 3 };
    let m = metrics(&cm);
    assert_eq!(m.precision, 0.0);
    assert_eq!(m.f1, 0.0);
    assert!(m.degenerate);
}

#[test]
fn tally_matches_counting_oracle_and_totals() {
    let mut rng = ChaCha8Rng::seed_from_u64(41);
    let labels: Vec<u8> = (0..1000).map(|_| rng.gen_range(0..=1)).collect();
    let preds: Vec<u8> = (0..1000).map(|_| rng.gen_range(0..=1)).collect();
    let cm = tally_confusion(&labels, &preds);

    let count = |y: u8, p: u8| {
        labels.iter().zip(&preds).filter(|(&l, &q)| l == y && q == p).count()
    };
    assert_eq!(cm.true_pos, count(1, 1));
    assert_eq!(cm.true_neg, count(0, 0));
    assert_eq!(cm.false_pos, count(0, 1));
    assert_eq!(cm.false_neg, count(1, 0));
    assert_eq!(cm.total(), 1000);
}

#[test]
fn evaluate_agrees_with_per_sample_predictions() {
    let model = desk_model(6);
    let set = separable_set(10, 8, 7);
    let cm = evaluate(&model, &set).unwrap();
    assert_eq!(cm.total(), 10);

    let mut expect = ConfusionMatrix::default();
    for (tensor, label) in &set {
        let batch = Tensor::stack(std::slice::from_ref(tensor)).unwrap();
        let pred = model.predict(&batch).unwrap()[0];
        match (label, pred) {
            (1, 1) => expect.true_pos += 1,
            (0, 0) => expect.true_neg += 1,
            (0, 1) => expect.false_pos += 1,
            (1, 0) => expect.false_neg += 1,
            _ => unreachable!(),
        }
    }
    assert_eq!(cm, expect);
}

// ── cross-validation aggregation ────────────────────────────────────────

fn report(fold: usize, acc: f64, prec: f64, rec: f64, f1: f64) -> FoldReport {
    FoldReport {
        fold,
        accuracy: acc,
        precision: prec,
        recall: rec,
        f1,
        degenerate: false,
        curves: Vec::new(),
        confusion: ConfusionMatrix::default(),
    }
}

#[test]
fn mean_of_recorded_fold_metrics_matches_published_row() {
    let folds = vec![
        report(0, 96.87, 96.90, 96.87, 96.87),
        report(1, 95.65, 95.70, 95.65, 95.64),
        report(2, 96.70, 96.78, 96.70, 96.69),
        report(3, 96.87, 96.94, 96.87, 96.86),
    ];
    let mean = mean_of_folds(&folds);
    assert!((mean.accuracy - 96.5225).abs() < 1e-9);
    assert_eq!(format!("{:.2}", mean.accuracy), "96.52");
    assert_eq!(format!("{:.2}", mean.precision), "96.58");
    assert_eq!(format!("{:.2}", mean.recall), "96.52");
}

#[test]
fn mean_matches_scalar_loop_average() {
    let mut rng = ChaCha8Rng::seed_from_u64(43);
    let folds: Vec<FoldReport> = (0..7)
        .map(|i| {
            report(
                i,
                rng.gen_range(0.0..100.0),
                rng.gen_range(0.0..100.0),
                rng.gen_range(0.0..100.0),
                rng.gen_range(0.0..100.0),
            )
        })
        .collect();
    let mean = mean_of_folds(&folds);
    let mut acc = 0.0;
    for f in &folds {
        acc += f.accuracy;
    }
    assert!((mean.accuracy - acc / 7.0).abs() < 1e-12);
}

#[test]
fn mean_is_invariant_under_fold_reordering() {
    let mut folds = vec![
        report(0, 90.0, 91.0, 92.0, 93.0),
        report(1, 80.0, 81.0, 82.0, 83.0),
        report(2, 70.0, 71.0, 72.0, 73.0),
    ];
    let forward = mean_of_folds(&folds);
    folds.reverse();
    let reversed = mean_of_folds(&folds);
    assert_eq!(forward, reversed);
}

#[test]
fn identical_fold_inputs_produce_identical_reports() {
    let base = FusionModelConfig::desk_scale(8, 21);
    let train_set = separable_set(8, 8, 8);
    let val_set = separable_set(4, 8, 9);
    let cfg = TrainConfig { epochs: 2, batch_size: 4, seed: 21 };
    let (a, _) = run_fold::<f32>(&base, 99, 0, &train_set, &val_set, &cfg, 0.001).unwrap();
    let (b, _) = run_fold::<f32>(&base, 99, 0, &train_set, &val_set, &cfg, 0.001).unwrap();
    assert_eq!(a, b);
}

#[test]
fn kfold_runs_every_fold_and_aggregates() {
    let base = FusionModelConfig::desk_scale(8, 33);
    let folds = vec![
        (separable_set(8, 8, 10), separable_set(4, 8, 11)),
        (separable_set(8, 8, 12), separable_set(4, 8, 13)),
    ];
    let cfg = TrainConfig { epochs: 2, batch_size: 4, seed: 33 };
    let (outcome, models) = kfold_cv(&base, &folds, &cfg, 0.001).unwrap();
    assert_eq!(outcome.folds.len(), 2);
    assert_eq!(models.len(), 2);
    assert_eq!(outcome.folds[0].fold, 0);
    assert_eq!(outcome.folds[1].fold, 1);
    let mean = mean_of_folds(&outcome.folds);
    assert_eq!(outcome.mean, mean);

    let (again, _) = kfold_cv(&base, &folds, &cfg, 0.001).unwrap();
    assert_eq!(outcome, again);
}

// ── grid search ─────────────────────────────────────────────────────────

#[test]
fn default_grid_enumerates_all_64_points() {
    assert_eq!(GridSpec::default().points().len(), 64);
}

#[test]
fn grid_rejects_values_outside_the_tuning_sets() {
    let grid = GridSpec { dense1_units: vec![48], ..GridSpec::default() };
    assert!(matches!(grid.validate(), Err(TrainError::BadGridValue { .. })));
    let grid = GridSpec { dense2_dropout: vec![0.3], ..GridSpec::default() };
    assert!(matches!(grid.validate(), Err(TrainError::BadGridValue { .. })));
}

#[test]
fn ranking_orders_by_accuracy_then_f1_then_config() {
    let point = |u1: usize, acc: f64, f1: f64| GridPoint {
        dense1_units: u1,
        dense1_dropout: 0.1,
        dense2_units: 32,
        dense2_dropout: 0.1,
        val_accuracy: acc,
        f1,
    };
    let mut points = vec![
        point(256, 90.0, 50.0),
        point(128, 95.0, 40.0),
        point(64, 90.0, 60.0),
        point(32, 90.0, 60.0),
    ];
    rank_points(&mut points);
    let order: Vec<usize> = points.iter().map(|p| p.dense1_units).collect();
    // 128 wins on accuracy; 64 and 32 tie on both metrics and fall back to
    // config order; 256 loses the f1 tiebreak.
    assert_eq!(order, vec![128, 32, 64, 256]);
}

#[test]
fn grid_search_evaluates_every_point_and_ranks_first_by_accuracy() {
    let base = FusionModelConfig::desk_scale(8, 55);
    let grid = GridSpec {
        dense1_units: vec![32, 64],
        dense1_dropout: vec![0.1],
        dense2_units: vec![32],
        dense2_dropout: vec![0.1],
    };
    let train_set = separable_set(8, 8, 14);
    let val_set = separable_set(4, 8, 15);
    let cfg = TrainConfig { epochs: 2, batch_size: 4, seed: 55 };
    let points = grid_search(&base, &grid, &train_set, &val_set, &cfg, 0.005).unwrap();
    assert_eq!(points.len(), 2);
    let max_acc = points.iter().map(|p| p.val_accuracy).fold(f64::MIN, f64::max);
    assert_eq!(points[0].val_accuracy, max_acc);

    let again = grid_search(&base, &grid, &train_set, &val_set, &cfg, 0.005).unwrap();
    assert_eq!(points, again);
}

#[test]
fn single_point_grid_ranks_it_first() {
    let base = FusionModelConfig::desk_scale(8, 77);
    let grid = GridSpec {
        dense1_units: vec![256],
        dense1_dropout: vec![0.2],
        dense2_units: vec![128],
        dense2_dropout: vec![0.1],
    };
    let train_set = separable_set(8, 8, 16);
    let val_set = separable_set(4, 8, 17);
    let cfg = TrainConfig { epochs: 1, batch_size: 4, seed: 77 };
    let points = grid_search(&base, &grid, &train_set, &val_set, &cfg, 0.001).unwrap();
    assert_eq!(points.len(), 1);
    assert_eq!(
        (points[0].dense1_units, points[0].dense1_dropout, points[0].dense2_units, points[0].dense2_dropout),
        (256, 0.2, 128, 0.1)
    );
}

// ── seed derivation ─────────────────────────────────────────────────────

#[test]
fn seed_derivations_follow_documented_arithmetic() {
    assert_eq!(fold_seed(7, 2), 9);
    assert_eq!(grid_seed(7, 3), 1010);
}
