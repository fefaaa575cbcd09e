//! Dense tensors with tape-based reverse-mode automatic differentiation.
//!
//! A [`Tensor`] is a cheaply clonable handle (`Arc`) to a row-major value
//! buffer plus an optional gradient buffer. Operations are driven through a
//! [`Tape`], which records every primitive it executes; [`Tape::backward`]
//! replays the record in reverse and accumulates gradients into every
//! `requires_grad` tensor reachable from the loss.
//!
//! Tensors are immutable after creation except for the optimizer's in-place
//! parameter update and batch-norm running statistics. A tensor may be moved
//! between threads; a single tape must be driven by one thread at a time.

mod gradcheck;
mod ops;
mod scalar;
mod tape;

pub use gradcheck::{finite_diff_check, EPS_RANGE};
pub use scalar::Scalar;
pub use tape::{Mode, Tape};

use std::fmt;
use std::sync::atomic::{AtomicBool, Ordering};
use std::sync::{Arc, RwLock, RwLockReadGuard};

// ── Errors ──────────────────────────────────────────────────────────────

/// Errors produced by tensor construction and primitive operations.
#[derive(Debug, Clone, PartialEq)]
pub enum TensorError {
    /// `product(shape)` does not match the supplied data length.
    ShapeDataMismatch { shape: Vec<usize>, data_len: usize },
    /// Two operands have incompatible shapes for the named operation.
    ShapeMismatch {
        op: &'static str,
        lhs: Vec<usize>,
        rhs: Vec<usize>,
    },
    /// An operand does not have the rank the operation requires.
    RankMismatch {
        op: &'static str,
        expected: usize,
        shape: Vec<usize>,
    },
    /// Convolution kernel exceeds the padded input extent.
    KernelTooLarge {
        input: Vec<usize>,
        kernel: Vec<usize>,
        padding: usize,
    },
    /// `backward` was called on a non-scalar tensor.
    NotScalar { shape: Vec<usize> },
    /// Finite-difference step outside the supported range.
    EpsOutOfRange { eps: f64 },
    /// The probed function returned different values for identical inputs.
    NonDeterministic { op: &'static str },
    /// Batch statistics are undefined for a single-sample training batch.
    BatchTooSmall { batch: usize },
    /// A non-finite value was produced where finiteness is required.
    NonFinite { op: &'static str },
}

impl fmt::Display for TensorError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Self::ShapeDataMismatch { shape, data_len } => write!(
                f,
                "shape {shape:?} implies {} elements but {data_len} were supplied",
                shape.iter().product::<usize>()
            ),
            Self::ShapeMismatch { op, lhs, rhs } => {
                write!(f, "{op}: incompatible shapes {lhs:?} and {rhs:?}")
            }
            Self::RankMismatch { op, expected, shape } => {
                write!(f, "{op}: expected rank {expected}, got shape {shape:?}")
            }
            Self::KernelTooLarge { input, kernel, padding } => write!(
                f,
                "conv2d: kernel {kernel:?} exceeds input {input:?} with padding {padding}"
            ),
            Self::NotScalar { shape } => {
                write!(f, "backward requires a scalar loss, got shape {shape:?}")
            }
            Self::EpsOutOfRange { eps } => {
                write!(f, "finite-difference step {eps} outside [1e-6, 1e-3]")
            }
            Self::NonDeterministic { op } => {
                write!(f, "{op}: function is not deterministic between probe calls")
            }
            Self::BatchTooSmall { batch } => {
                write!(f, "batch norm in training mode needs a batch of >= 2, got {batch}")
            }
            Self::NonFinite { op } => write!(f, "{op}: produced a non-finite value"),
        }
    }
}

impl std::error::Error for TensorError {}

pub type Result<T> = std::result::Result<T, TensorError>;

// ── Tensor ──────────────────────────────────────────────────────────────

struct Inner<E> {
    shape: Vec<usize>,
    data: RwLock<Vec<E>>,
    requires_grad: AtomicBool,
    grad: RwLock<Option<Vec<E>>>,
}

/// N-dimensional array of [`Scalar`] values in row-major order.
///
/// Cloning copies the handle, not the buffer: clones share data, gradient
/// and the `requires_grad` flag.
pub struct Tensor<E: Scalar = f32> {
    inner: Arc<Inner<E>>,
}

impl<E: Scalar> Clone for Tensor<E> {
    fn clone(&self) -> Self {
        Tensor { inner: Arc::clone(&self.inner) }
    }
}

impl<E: Scalar> fmt::Debug for Tensor<E> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "Tensor(shape={:?}, requires_grad={})",
            self.inner.shape,
            self.requires_grad()
        )
    }
}

impl<E: Scalar> Tensor<E> {
    /// Build a tensor from row-major data. Fails when the shape does not
    /// account for every element.
    pub fn new(data: Vec<E>, shape: &[usize]) -> Result<Self> {
        if shape.iter().product::<usize>() != data.len() {
            return Err(TensorError::ShapeDataMismatch {
                shape: shape.to_vec(),
                data_len: data.len(),
            });
        }
        Ok(Self::from_parts(data, shape.to_vec()))
    }

    fn from_parts(data: Vec<E>, shape: Vec<usize>) -> Self {
        Tensor {
            inner: Arc::new(Inner {
                shape,
                data: RwLock::new(data),
                requires_grad: AtomicBool::new(false),
                grad: RwLock::new(None),
            }),
        }
    }

    pub fn zeros(shape: &[usize]) -> Self {
        Self::from_parts(vec![E::zero(); shape.iter().product()], shape.to_vec())
    }

    pub fn filled(shape: &[usize], value: E) -> Self {
        Self::from_parts(vec![value; shape.iter().product()], shape.to_vec())
    }

    /// Single-element tensor of shape `[1]`.
    pub fn scalar(value: E) -> Self {
        Self::from_parts(vec![value], vec![1])
    }

    /// Stack same-shaped tensors along a new leading axis.
    pub fn stack(items: &[Tensor<E>]) -> Result<Self> {
        let first = items.first().ok_or(TensorError::ShapeDataMismatch {
            shape: vec![0],
            data_len: 0,
        })?;
        let mut data = Vec::with_capacity(items.len() * first.numel());
        for item in items {
            if item.shape() != first.shape() {
                return Err(TensorError::ShapeMismatch {
                    op: "stack",
                    lhs: first.shape().to_vec(),
                    rhs: item.shape().to_vec(),
                });
            }
            data.extend_from_slice(&item.read());
        }
        let mut shape = vec![items.len()];
        shape.extend_from_slice(first.shape());
        Ok(Self::from_parts(data, shape))
    }

    pub fn shape(&self) -> &[usize] {
        &self.inner.shape
    }

    pub fn rank(&self) -> usize {
        self.inner.shape.len()
    }

    pub fn numel(&self) -> usize {
        self.inner.shape.iter().product()
    }

    pub fn is_scalar(&self) -> bool {
        self.numel() == 1
    }

    /// Read guard over the value buffer.
    pub fn read(&self) -> RwLockReadGuard<'_, Vec<E>> {
        self.inner.data.read().expect("tensor data lock poisoned")
    }

    pub fn to_vec(&self) -> Vec<E> {
        self.read().clone()
    }

    /// Value of a single-element tensor.
    pub fn item(&self) -> E {
        debug_assert!(self.is_scalar());
        self.read()[0]
    }

    pub fn requires_grad(&self) -> bool {
        self.inner.requires_grad.load(Ordering::Relaxed)
    }

    pub fn set_requires_grad(&self, value: bool) {
        self.inner.requires_grad.store(value, Ordering::Relaxed);
    }

    /// Marks the tensor as a gradient leaf and returns it.
    pub fn tracked(self) -> Self {
        self.set_requires_grad(true);
        self
    }

    /// Snapshot of the accumulated gradient, if any.
    pub fn grad(&self) -> Option<Vec<E>> {
        self.inner.grad.read().expect("grad lock poisoned").clone()
    }

    pub fn zero_grad(&self) {
        *self.inner.grad.write().expect("grad lock poisoned") = None;
    }

    /// Add `delta` into the gradient buffer, creating it on first use.
    pub(crate) fn accumulate_grad(&self, delta: &[E]) {
        debug_assert_eq!(delta.len(), self.numel());
        let mut guard = self.inner.grad.write().expect("grad lock poisoned");
        match guard.as_mut() {
            Some(grad) => {
                for (g, d) in grad.iter_mut().zip(delta) {
                    *g = *g + *d;
                }
            }
            None => *guard = Some(delta.to_vec()),
        }
    }

    /// In-place update of the value buffer (optimizer step, running stats).
    pub fn update_data(&self, f: impl FnOnce(&mut [E])) {
        let mut guard = self.inner.data.write().expect("tensor data lock poisoned");
        f(&mut guard);
    }

    /// Whether two handles refer to the same storage.
    pub fn same_storage(&self, other: &Tensor<E>) -> bool {
        Arc::ptr_eq(&self.inner, &other.inner)
    }

    /// Deep copy with fresh storage; gradient state is not copied.
    pub fn detached_copy(&self) -> Self {
        let copy = Self::from_parts(self.to_vec(), self.inner.shape.clone());
        copy.set_requires_grad(self.requires_grad());
        copy
    }

    pub fn iter_finite(&self) -> bool {
        self.read().iter().all(|v| v.is_finite())
    }

    /// Cast element type; used to mirror an `f32` model at `f64` for checks.
    pub fn cast<F: Scalar>(&self) -> Tensor<F> {
        let data = self.read().iter().map(|&v| F::from_f64(v.to_f64())).collect();
        let out = Tensor::<F>::from_parts(data, self.inner.shape.clone());
        out.set_requires_grad(self.requires_grad());
        out
    }
}
