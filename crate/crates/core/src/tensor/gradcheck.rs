//! Central finite-difference oracle for verifying taped gradients.

use super::{Result, Scalar, Tape, Tensor, TensorError};

/// Supported finite-difference step range.
pub const EPS_RANGE: (f64, f64) = (1e-6, 1e-3);

fn eval_scalar<E: Scalar, F>(f: &F, tape: &mut Tape<E>, t: &Tensor<E>) -> Result<E>
where
    F: Fn(&mut Tape<E>, &Tensor<E>) -> Result<Tensor<E>>,
{
    let out = f(tape, t)?;
    if !out.is_scalar() {
        return Err(TensorError::NotScalar { shape: out.shape().to_vec() });
    }
    Ok(out.item())
}

/// Compare the taped gradient of a scalar-valued function against central
/// finite differences, coordinate by coordinate.
///
/// Returns the maximum over coordinates of
/// `|analytic - numeric| / max(1, |numeric|)`.
///
/// The function must be deterministic between probe calls (dropout disabled,
/// batch-norm statistics fixed); this is verified by evaluating it twice
/// before probing. Run with `E = f64` for verification-grade precision.
pub fn finite_diff_check<E: Scalar, F>(f: F, t: &Tensor<E>, eps: f64) -> Result<f64>
where
    F: Fn(&mut Tape<E>, &Tensor<E>) -> Result<Tensor<E>>,
{
    if !(EPS_RANGE.0..=EPS_RANGE.1).contains(&eps) {
        return Err(TensorError::EpsOutOfRange { eps });
    }

    let base = eval_scalar(&f, &mut Tape::inference(), t)?;
    let again = eval_scalar(&f, &mut Tape::inference(), t)?;
    if base.to_f64().to_bits() != again.to_f64().to_bits() {
        return Err(TensorError::NonDeterministic { op: "finite_diff_check" });
    }

    // Analytic pass on a tracked copy of the probe point.
    let leaf = Tensor::new(t.to_vec(), t.shape())?.tracked();
    let mut tape = Tape::new();
    let out = f(&mut tape, &leaf)?;
    if !out.is_scalar() {
        return Err(TensorError::NotScalar { shape: out.shape().to_vec() });
    }
    tape.backward(&out)?;
    let analytic = leaf.grad().unwrap_or_else(|| vec![E::zero(); leaf.numel()]);

    let step = E::from_f64(eps);
    let mut worst = 0.0f64;
    let base_data = t.to_vec();
    for i in 0..t.numel() {
        let mut plus = base_data.clone();
        plus[i] = plus[i] + step;
        let mut minus = base_data.clone();
        minus[i] = minus[i] - step;
        let f_plus = eval_scalar(&f, &mut Tape::inference(), &Tensor::new(plus, t.shape())?)?;
        let f_minus = eval_scalar(&f, &mut Tape::inference(), &Tensor::new(minus, t.shape())?)?;
        let numeric = (f_plus.to_f64() - f_minus.to_f64()) / (2.0 * eps);
        let rel = (analytic[i].to_f64() - numeric).abs() / numeric.abs().max(1.0);
        if rel > worst {
            worst = rel;
        }
    }
    Ok(worst)
}
