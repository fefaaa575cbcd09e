//! Element type abstraction: `f32` for training, `f64` for verification.

use std::fmt::{Debug, Display};
use std::iter::Sum;

/// Floating-point element of a [`super::Tensor`].
///
/// Training storage is `f32`; the finite-difference oracle re-runs the same
/// generic code at `f64` so truncation noise does not mask gradient bugs.
pub trait Scalar:
    num_traits::Float + Debug + Display + Default + Send + Sync + Sum + 'static
{
    fn from_f64(v: f64) -> Self;
    fn to_f64(self) -> f64;
}

impl Scalar for f32 {
    fn from_f64(v: f64) -> Self {
        v as f32
    }
    fn to_f64(self) -> f64 {
        self as f64
    }
}

impl Scalar for f64 {
    fn from_f64(v: f64) -> Self {
        v
    }
    fn to_f64(self) -> f64 {
        self
    }
}
