//! Seeded parameter initialization.

use crate::tensor::{Scalar, Tensor};
use rand::Rng;
use rand_chacha::ChaCha8Rng;

/// Uniform weights in `(-1/sqrt(fan_in), 1/sqrt(fan_in))`.
///
/// Draws happen in `f64` so that an `f32` model and its `f64` verification
/// mirror see identical values from the same seed.
pub fn uniform_fan_in<E: Scalar>(shape: &[usize], fan_in: usize, rng: &mut ChaCha8Rng) -> Tensor<E> {
    let bound = 1.0 / (fan_in.max(1) as f64).sqrt();
    let n: usize = shape.iter().product();
    let data = (0..n)
        .map(|_| E::from_f64(rng.gen_range(-bound..bound)))
        .collect();
    Tensor::new(data, shape).expect("shape consistent by construction")
}
