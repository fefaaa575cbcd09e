//! Registry of finite-difference checks over every differentiable
//! primitive, the squeeze-and-excitation block and the full model path.
//!
//! Checks run at `f64` so truncation noise stays far below the thresholds.

use crate::layers::SEBlockParams;
use crate::model::{FusionModel, FusionModelConfig};
use crate::tensor::{finite_diff_check, Mode, Tape, Tensor};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// Default threshold for primitive gradients.
pub const PRIMITIVE_THRESHOLD: f64 = 1e-4;
/// Threshold for the composed full-model path.
pub const MODEL_THRESHOLD: f64 = 1e-3;

type CheckFn = Box<dyn Fn() -> Result<f64, String> + Send>;
type ForwardFn<'a> =
    dyn Fn(&mut Tape<f64>, &Tensor<f64>) -> Result<Tensor<f64>, crate::tensor::TensorError> + 'a;

/// A named gradient check with its pass threshold.
pub struct GradCheck {
    pub name: &'static str,
    pub threshold: f64,
    run: CheckFn,
}

impl GradCheck {
    pub fn new(name: &'static str, threshold: f64, run: CheckFn) -> Self {
        GradCheck { name, threshold, run }
    }
}

/// Outcome of one check.
#[derive(Debug, Clone, PartialEq)]
pub struct GradCheckOutcome {
    pub name: &'static str,
    pub max_rel_error: f64,
    pub threshold: f64,
}

impl GradCheckOutcome {
    pub fn passed(&self) -> bool {
        self.max_rel_error < self.threshold
    }
}

/// Run every check; an execution failure is reported as the check's name
/// plus the error text.
pub fn run_suite(checks: &[GradCheck]) -> Result<Vec<GradCheckOutcome>, String> {
    let mut out = Vec::with_capacity(checks.len());
    for check in checks {
        let max_rel_error =
            (check.run)().map_err(|e| format!("{} failed to run: {e}", check.name))?;
        out.push(GradCheckOutcome {
            name: check.name,
            max_rel_error,
            threshold: check.threshold,
        });
    }
    Ok(out)
}

fn rand_tensor(rng: &mut ChaCha8Rng, shape: &[usize], lo: f64, hi: f64) -> Tensor<f64> {
    let data = (0..shape.iter().product::<usize>())
        .map(|_| rng.gen_range(lo..hi))
        .collect();
    Tensor::new(data, shape).expect("shape consistent")
}

fn sum_of_squares(tape: &mut Tape<f64>, t: &Tensor<f64>) -> Result<Tensor<f64>, crate::tensor::TensorError> {
    let sq = tape.mul(t, t)?;
    Ok(tape.sum_all(&sq))
}

macro_rules! check {
    ($name:literal, $threshold:expr, $body:expr) => {
        GradCheck::new($name, $threshold, Box::new($body))
    };
}

/// The standard registry: each differentiable primitive exactly once, the
/// composed SE block, and the full fusion model path.
pub fn default_suite() -> Vec<GradCheck> {
    let fd = |f: &ForwardFn<'_>, t: &Tensor<f64>| -> Result<f64, String> {
        finite_diff_check(f, t, 1e-4).map_err(|e| e.to_string())
    };

    vec![
        check!("sigmoid", PRIMITIVE_THRESHOLD, move || {
            let mut rng = ChaCha8Rng::seed_from_u64(101);
            let t = rand_tensor(&mut rng, &[2, 8], -2.0, 2.0);
            fd(
                &|tape, t| {
                    let s = tape.sigmoid(t);
                    sum_of_squares(tape, &s)
                },
                &t,
            )
        }),
        check!("relu", PRIMITIVE_THRESHOLD, move || {
            let mut rng = ChaCha8Rng::seed_from_u64(102);
            // Keep probe points away from the kink at zero.
            let data: Vec<f64> = (0..16)
                .map(|_| {
                    let v: f64 = rng.gen_range(0.01..1.0);
                    if rng.gen_bool(0.5) {
                        v
                    } else {
                        -v
                    }
                })
                .collect();
            let t = Tensor::new(data, &[4, 4]).map_err(|e| e.to_string())?;
            fd(
                &|tape, t| {
                    let y = tape.relu(t);
                    sum_of_squares(tape, &y)
                },
                &t,
            )
        }),
        check!("matmul", PRIMITIVE_THRESHOLD, move || {
            let mut rng = ChaCha8Rng::seed_from_u64(103);
            let a = rand_tensor(&mut rng, &[3, 5], -1.0, 1.0);
            let t = rand_tensor(&mut rng, &[5, 4], -1.0, 1.0);
            fd(
                &|tape, t| {
                    let y = tape.matmul(&a, t)?;
                    sum_of_squares(tape, &y)
                },
                &t,
            )
        }),
        check!("conv2d", PRIMITIVE_THRESHOLD, move || {
            let mut rng = ChaCha8Rng::seed_from_u64(104);
            let x = rand_tensor(&mut rng, &[2, 2, 4, 4], -1.0, 1.0);
            let k = rand_tensor(&mut rng, &[3, 2, 3, 3], -0.5, 0.5);
            fd(
                &|tape, k| {
                    let y = tape.conv2d(&x, k, 2, 1)?;
                    sum_of_squares(tape, &y)
                },
                &k,
            )
        }),
        check!("global_avg_pool", PRIMITIVE_THRESHOLD, move || {
            let mut rng = ChaCha8Rng::seed_from_u64(105);
            let t = rand_tensor(&mut rng, &[2, 3, 3, 3], -1.0, 1.0);
            fd(
                &|tape, t| {
                    let y = tape.global_avg_pool(t)?;
                    sum_of_squares(tape, &y)
                },
                &t,
            )
        }),
        check!("mul_channel_broadcast", PRIMITIVE_THRESHOLD, move || {
            let mut rng = ChaCha8Rng::seed_from_u64(106);
            let x = rand_tensor(&mut rng, &[2, 4, 2, 2], -1.0, 1.0);
            let t = rand_tensor(&mut rng, &[2, 4], 0.1, 0.9);
            fd(
                &|tape, e| {
                    let y = tape.mul_channel_broadcast(&x, e)?;
                    sum_of_squares(tape, &y)
                },
                &t,
            )
        }),
        check!("concat_channels", PRIMITIVE_THRESHOLD, move || {
            let mut rng = ChaCha8Rng::seed_from_u64(107);
            let b = rand_tensor(&mut rng, &[2, 3, 2, 2], -1.0, 1.0);
            let t = rand_tensor(&mut rng, &[2, 2, 2, 2], -1.0, 1.0);
            fd(
                &|tape, a| {
                    let y = tape.concat_channels(a, &b)?;
                    sum_of_squares(tape, &y)
                },
                &t,
            )
        }),
        check!("add", PRIMITIVE_THRESHOLD, move || {
            let mut rng = ChaCha8Rng::seed_from_u64(108);
            let b = rand_tensor(&mut rng, &[3, 4], -1.0, 1.0);
            let t = rand_tensor(&mut rng, &[3, 4], -1.0, 1.0);
            fd(
                &|tape, a| {
                    let y = tape.add(a, &b)?;
                    sum_of_squares(tape, &y)
                },
                &t,
            )
        }),
        check!("mul", PRIMITIVE_THRESHOLD, move || {
            let mut rng = ChaCha8Rng::seed_from_u64(109);
            let b = rand_tensor(&mut rng, &[3, 4], 0.5, 1.5);
            let t = rand_tensor(&mut rng, &[3, 4], -1.0, 1.0);
            fd(
                &|tape, a| {
                    let y = tape.mul(a, &b)?;
                    sum_of_squares(tape, &y)
                },
                &t,
            )
        }),
        check!("add_row_bias", PRIMITIVE_THRESHOLD, move || {
            let mut rng = ChaCha8Rng::seed_from_u64(110);
            let x = rand_tensor(&mut rng, &[4, 3], -1.0, 1.0);
            let t = rand_tensor(&mut rng, &[3], -0.5, 0.5);
            fd(
                &|tape, bias| {
                    let y = tape.add_row_bias(&x, bias)?;
                    sum_of_squares(tape, &y)
                },
                &t,
            )
        }),
        check!("add_channel_bias", PRIMITIVE_THRESHOLD, move || {
            let mut rng = ChaCha8Rng::seed_from_u64(111);
            let x = rand_tensor(&mut rng, &[2, 3, 2, 2], -1.0, 1.0);
            let t = rand_tensor(&mut rng, &[3], -0.5, 0.5);
            fd(
                &|tape, bias| {
                    let y = tape.add_channel_bias(&x, bias)?;
                    sum_of_squares(tape, &y)
                },
                &t,
            )
        }),
        check!("batch_norm", PRIMITIVE_THRESHOLD, move || {
            let mut rng = ChaCha8Rng::seed_from_u64(112);
            let gamma = rand_tensor(&mut rng, &[3], 0.5, 1.5);
            let beta = rand_tensor(&mut rng, &[3], -0.5, 0.5);
            let t = rand_tensor(&mut rng, &[4, 3], -2.0, 2.0);
            fd(
                &|tape, x| {
                    let (y, _, _) = tape.batch_norm(x, &gamma, &beta, 1e-5)?;
                    sum_of_squares(tape, &y)
                },
                &t,
            )
        }),
        check!("dropout_mask", PRIMITIVE_THRESHOLD, move || {
            let mut rng = ChaCha8Rng::seed_from_u64(113);
            let t = rand_tensor(&mut rng, &[4, 4], -1.0, 1.0);
            // A fixed mask makes the op deterministic between probes.
            let mask: Vec<f64> = (0..16).map(|i| if i % 3 == 0 { 0.0 } else { 1.25 }).collect();
            fd(
                &|tape, x| {
                    let y = tape.apply_mask(x, mask.clone())?;
                    sum_of_squares(tape, &y)
                },
                &t,
            )
        }),
        check!("reshape", PRIMITIVE_THRESHOLD, move || {
            let mut rng = ChaCha8Rng::seed_from_u64(114);
            let t = rand_tensor(&mut rng, &[2, 6], -1.0, 1.0);
            fd(
                &|tape, x| {
                    let y = tape.reshape(x, &[3, 4])?;
                    sum_of_squares(tape, &y)
                },
                &t,
            )
        }),
        check!("bce_loss", PRIMITIVE_THRESHOLD, move || {
            let mut rng = ChaCha8Rng::seed_from_u64(115);
            let t = rand_tensor(&mut rng, &[8], 0.1, 0.9);
            let targets: Vec<f64> = (0..8).map(|i| f64::from(i % 2 == 0)).collect();
            fd(&|tape, p| tape.bce_loss(p, &targets, 1e-7), &t)
        }),
        check!("se_block", PRIMITIVE_THRESHOLD, move || {
            let mut rng = ChaCha8Rng::seed_from_u64(116);
            let mut param_rng = ChaCha8Rng::seed_from_u64(117);
            let se = SEBlockParams::<f64>::new(4, 2, &mut param_rng).map_err(|e| e.to_string())?;
            let t = rand_tensor(&mut rng, &[2, 4, 2, 2], -1.0, 1.0);
            fd(
                &|tape, x| {
                    let z = tape.global_avg_pool(x)?;
                    let down = tape.matmul(&z, &se.w1)?;
                    let act = tape.relu(&down);
                    let up = tape.matmul(&act, &se.w2)?;
                    let e = tape.sigmoid(&up);
                    let y = tape.mul_channel_broadcast(x, &e)?;
                    sum_of_squares(tape, &y)
                },
                &t,
            )
        }),
        check!("fusion_model", MODEL_THRESHOLD, move || {
            // Full path: both branches, attention, fusion, dense blocks and
            // loss, differentiated with respect to the first conv kernel,
            // which is grafted to the probe tensor on every call.
            let mut cfg = FusionModelConfig::desk_scale(8, 118);
            cfg.dense1_dropout = 0.0;
            cfg.dense2_dropout = 0.0;
            let model =
                std::cell::RefCell::new(FusionModel::<f64>::build(cfg).map_err(|e| e.to_string())?);
            let mut rng = ChaCha8Rng::seed_from_u64(119);
            let batch = rand_tensor(&mut rng, &[2, 3, 8, 8], 0.0, 1.0);
            let targets = [1u8, 0];
            let kernel_init = model
                .borrow()
                .named_parameters()
                .into_iter()
                .find(|(n, _)| n == "branch_a.stage0.conv.weight")
                .map(|(_, t)| t.detached_copy())
                .expect("stage0 kernel exists");

            finite_diff_check(
                |tape: &mut Tape<f64>, probe: &Tensor<f64>| {
                    model
                        .borrow_mut()
                        .graft_stage_weight(crate::model::Branch::A, 0, probe.clone());
                    let mut dropout_rng = ChaCha8Rng::seed_from_u64(0);
                    let probs = model
                        .borrow()
                        .forward(tape, &batch, Mode::Training, &mut dropout_rng)
                        .map_err(|_| crate::tensor::TensorError::NonFinite { op: "forward" })?;
                    crate::train::bce_loss(tape, &targets, &probs)
                        .map_err(|_| crate::tensor::TensorError::NonFinite { op: "loss" })
                },
                &kernel_init,
                1e-4,
            )
            .map_err(|e| e.to_string())
        }),
    ]
}
