//! A self-contained deep-learning library for binary image classification
//! with a dual-branch convolutional backbone, squeeze-and-excitation channel
//! attention and feature fusion.
//!
//! The crate is organised bottom-up:
//!
//! - [`tensor`] — dense tensors plus tape-based reverse-mode autodiff and a
//!   finite-difference gradient oracle,
//! - [`layers`] — dense / batch-norm / dropout layers and the
//!   squeeze-and-excitation block,
//! - [`model`] — the two-branch fusion classifier and its binary checkpoint
//!   format,
//! - [`data`] — dataset indexing, image decoding, augmentation, stratified
//!   splits and k-fold plans,
//! - [`train`] — binary cross-entropy, Adam, the training loop, metrics,
//!   cross-validation and grid search.
//!
//! Training runs in `f32`; every differentiable code path is generic over
//! [`tensor::Scalar`] so the gradient oracle can re-run it in `f64`.

pub mod data;
pub mod layers;
pub mod model;
pub mod tensor;
pub mod train;
pub mod verify;

pub use tensor::{Tape, Tensor, TensorError};
