//! Eager op recording and the reverse pass.
//!
//! Every primitive executes immediately and, when the tape is recording and
//! the result participates in a gradient, pushes a [`Recorded`] entry.
//! [`Tape::backward`] walks the record once in reverse; recording order makes
//! the walk topological, because an op can only consume tensors that already
//! existed when it ran.

use super::ops;
use super::{Result, Scalar, Tensor, TensorError};

/// Forward-pass mode for layers with train/infer behaviour differences.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Mode {
    Training,
    Inference,
}

enum Recorded<E: Scalar> {
    Sigmoid { x: Tensor<E>, y: Tensor<E> },
    Relu { x: Tensor<E>, y: Tensor<E> },
    Add { a: Tensor<E>, b: Tensor<E>, y: Tensor<E> },
    Mul { a: Tensor<E>, b: Tensor<E>, y: Tensor<E> },
    Scale { x: Tensor<E>, factor: E, y: Tensor<E> },
    SumAll { x: Tensor<E>, y: Tensor<E> },
    Matmul { a: Tensor<E>, b: Tensor<E>, y: Tensor<E> },
    AddRowBias { x: Tensor<E>, bias: Tensor<E>, y: Tensor<E> },
    AddChannelBias { x: Tensor<E>, bias: Tensor<E>, y: Tensor<E> },
    Conv2d {
        x: Tensor<E>,
        kernel: Tensor<E>,
        y: Tensor<E>,
        stride: usize,
        padding: usize,
    },
    GlobalAvgPool { x: Tensor<E>, y: Tensor<E> },
    MulChannelBroadcast { x: Tensor<E>, e: Tensor<E>, y: Tensor<E> },
    ConcatChannels { a: Tensor<E>, b: Tensor<E>, y: Tensor<E> },
    Reshape { x: Tensor<E>, y: Tensor<E> },
    ApplyMask { x: Tensor<E>, mask: Vec<E>, y: Tensor<E> },
    ChannelAffine { x: Tensor<E>, scale: Vec<E>, y: Tensor<E> },
    BatchNorm {
        x: Tensor<E>,
        gamma: Tensor<E>,
        beta: Tensor<E>,
        y: Tensor<E>,
        x_hat: Vec<E>,
        inv_std: Vec<E>,
    },
    BceLoss {
        probs: Tensor<E>,
        targets: Vec<E>,
        clipped: Vec<E>,
        y: Tensor<E>,
    },
}

/// Ordered record of executed primitives for one forward pass.
pub struct Tape<E: Scalar = f32> {
    ops: Vec<Recorded<E>>,
    recording: bool,
}

impl<E: Scalar> Default for Tape<E> {
    fn default() -> Self {
        Self::new()
    }
}

impl<E: Scalar> Tape<E> {
    /// A recording tape: ops touching gradient-tracked tensors are retained.
    pub fn new() -> Self {
        Tape { ops: Vec::new(), recording: true }
    }

    /// A disabled tape for inference: ops execute, nothing is retained.
    pub fn inference() -> Self {
        Tape { ops: Vec::new(), recording: false }
    }

    pub fn for_mode(mode: Mode) -> Self {
        match mode {
            Mode::Training => Self::new(),
            Mode::Inference => Self::inference(),
        }
    }

    pub fn is_recording(&self) -> bool {
        self.recording
    }

    pub fn num_ops(&self) -> usize {
        self.ops.len()
    }

    fn finish<F>(&mut self, y: Tensor<E>, tracked: bool, rec: F) -> Tensor<E>
    where
        F: FnOnce(Tensor<E>) -> Recorded<E>,
    {
        y.set_requires_grad(tracked);
        if self.recording && tracked {
            self.ops.push(rec(y.clone()));
        }
        y
    }

    // ── Elementwise primitives ──────────────────────────────────────────

    /// Elementwise logistic function; output strictly inside (0,1).
    pub fn sigmoid(&mut self, x: &Tensor<E>) -> Tensor<E> {
        let data = x.read().iter().map(|&v| ops::sigmoid_scalar(v)).collect::<Vec<_>>();
        let y = Tensor::new(data, x.shape()).expect("shape preserved");
        self.finish(y, x.requires_grad(), |y| Recorded::Sigmoid { x: x.clone(), y })
    }

    /// Elementwise max(0, x); the subgradient at exactly 0 is 0.
    pub fn relu(&mut self, x: &Tensor<E>) -> Tensor<E> {
        let data = x.read().iter().map(|&v| v.max(E::zero())).collect::<Vec<_>>();
        let y = Tensor::new(data, x.shape()).expect("shape preserved");
        self.finish(y, x.requires_grad(), |y| Recorded::Relu { x: x.clone(), y })
    }

    /// Elementwise sum of two same-shape tensors.
    pub fn add(&mut self, a: &Tensor<E>, b: &Tensor<E>) -> Result<Tensor<E>> {
        if a.shape() != b.shape() {
            return Err(TensorError::ShapeMismatch {
                op: "add",
                lhs: a.shape().to_vec(),
                rhs: b.shape().to_vec(),
            });
        }
        let data = a.read().iter().zip(b.read().iter()).map(|(&x, &y)| x + y).collect();
        let y = Tensor::new(data, a.shape())?;
        let tracked = a.requires_grad() || b.requires_grad();
        Ok(self.finish(y, tracked, |y| Recorded::Add { a: a.clone(), b: b.clone(), y }))
    }

    /// Elementwise product of two same-shape tensors.
    pub fn mul(&mut self, a: &Tensor<E>, b: &Tensor<E>) -> Result<Tensor<E>> {
        if a.shape() != b.shape() {
            return Err(TensorError::ShapeMismatch {
                op: "mul",
                lhs: a.shape().to_vec(),
                rhs: b.shape().to_vec(),
            });
        }
        let data = a.read().iter().zip(b.read().iter()).map(|(&x, &y)| x * y).collect();
        let y = Tensor::new(data, a.shape())?;
        let tracked = a.requires_grad() || b.requires_grad();
        Ok(self.finish(y, tracked, |y| Recorded::Mul { a: a.clone(), b: b.clone(), y }))
    }

    /// Multiply every element by a constant.
    pub fn scale(&mut self, x: &Tensor<E>, factor: E) -> Tensor<E> {
        let data = x.read().iter().map(|&v| v * factor).collect::<Vec<_>>();
        let y = Tensor::new(data, x.shape()).expect("shape preserved");
        self.finish(y, x.requires_grad(), |y| Recorded::Scale { x: x.clone(), factor, y })
    }

    /// Sum of all elements as a `[1]` tensor.
    pub fn sum_all(&mut self, x: &Tensor<E>) -> Tensor<E> {
        let total = x.read().iter().copied().fold(E::zero(), |acc, v| acc + v);
        let y = Tensor::scalar(total);
        self.finish(y, x.requires_grad(), |y| Recorded::SumAll { x: x.clone(), y })
    }

    // ── Linear algebra ──────────────────────────────────────────────────

    /// `[m,k] @ [k,n] -> [m,n]`.
    pub fn matmul(&mut self, a: &Tensor<E>, b: &Tensor<E>) -> Result<Tensor<E>> {
        if a.rank() != 2 || b.rank() != 2 || a.shape()[1] != b.shape()[0] {
            return Err(TensorError::ShapeMismatch {
                op: "matmul",
                lhs: a.shape().to_vec(),
                rhs: b.shape().to_vec(),
            });
        }
        let (m, k) = (a.shape()[0], a.shape()[1]);
        let n = b.shape()[1];
        let data = ops::matmul(&a.read(), &b.read(), m, k, n);
        let y = Tensor::new(data, &[m, n])?;
        let tracked = a.requires_grad() || b.requires_grad();
        Ok(self.finish(y, tracked, |y| Recorded::Matmul { a: a.clone(), b: b.clone(), y }))
    }

    /// `[n,m] + [m]`, bias broadcast over rows.
    pub fn add_row_bias(&mut self, x: &Tensor<E>, bias: &Tensor<E>) -> Result<Tensor<E>> {
        if x.rank() != 2 || bias.rank() != 1 || bias.shape()[0] != x.shape()[1] {
            return Err(TensorError::ShapeMismatch {
                op: "add_row_bias",
                lhs: x.shape().to_vec(),
                rhs: bias.shape().to_vec(),
            });
        }
        let m = x.shape()[1];
        let b = bias.read();
        let data = x
            .read()
            .iter()
            .enumerate()
            .map(|(i, &v)| v + b[i % m])
            .collect();
        drop(b);
        let y = Tensor::new(data, x.shape())?;
        let tracked = x.requires_grad() || bias.requires_grad();
        Ok(self.finish(y, tracked, |y| Recorded::AddRowBias { x: x.clone(), bias: bias.clone(), y }))
    }

    /// `[n,c,...] + [c]`, bias broadcast over batch and spatial dims.
    pub fn add_channel_bias(&mut self, x: &Tensor<E>, bias: &Tensor<E>) -> Result<Tensor<E>> {
        if x.rank() < 2 || bias.rank() != 1 || bias.shape()[0] != x.shape()[1] {
            return Err(TensorError::ShapeMismatch {
                op: "add_channel_bias",
                lhs: x.shape().to_vec(),
                rhs: bias.shape().to_vec(),
            });
        }
        let c = x.shape()[1];
        let spatial: usize = x.shape()[2..].iter().product();
        let b = bias.read();
        let data = x
            .read()
            .iter()
            .enumerate()
            .map(|(i, &v)| v + b[(i / spatial) % c])
            .collect();
        drop(b);
        let y = Tensor::new(data, x.shape())?;
        let tracked = x.requires_grad() || bias.requires_grad();
        Ok(self.finish(y, tracked, |y| {
            Recorded::AddChannelBias { x: x.clone(), bias: bias.clone(), y }
        }))
    }

    /// Cross-correlation of `[n,c,h,w]` with kernel `[f,c,kh,kw]`, zero
    /// padding, floor output extents.
    pub fn conv2d(
        &mut self,
        x: &Tensor<E>,
        kernel: &Tensor<E>,
        stride: usize,
        padding: usize,
    ) -> Result<Tensor<E>> {
        if x.rank() != 4 {
            return Err(TensorError::RankMismatch { op: "conv2d", expected: 4, shape: x.shape().to_vec() });
        }
        if kernel.rank() != 4 || kernel.shape()[1] != x.shape()[1] {
            return Err(TensorError::ShapeMismatch {
                op: "conv2d",
                lhs: x.shape().to_vec(),
                rhs: kernel.shape().to_vec(),
            });
        }
        assert!(stride >= 1, "conv2d stride must be positive");
        let (n, c, h, w) = (x.shape()[0], x.shape()[1], x.shape()[2], x.shape()[3]);
        let (f, kh, kw) = (kernel.shape()[0], kernel.shape()[2], kernel.shape()[3]);
        if h + 2 * padding < kh || w + 2 * padding < kw {
            return Err(TensorError::KernelTooLarge {
                input: x.shape().to_vec(),
                kernel: kernel.shape().to_vec(),
                padding,
            });
        }
        let oh = ops::conv_out_extent(h, kh, stride, padding);
        let ow = ops::conv_out_extent(w, kw, stride, padding);
        let data = ops::conv2d_forward(&x.read(), &kernel.read(), n, c, h, w, f, kh, kw, stride, padding);
        let y = Tensor::new(data, &[n, f, oh, ow])?;
        let tracked = x.requires_grad() || kernel.requires_grad();
        Ok(self.finish(y, tracked, |y| Recorded::Conv2d {
            x: x.clone(),
            kernel: kernel.clone(),
            y,
            stride,
            padding,
        }))
    }

    /// Per-channel spatial mean: `[n,c,h,w] -> [n,c]`.
    pub fn global_avg_pool(&mut self, x: &Tensor<E>) -> Result<Tensor<E>> {
        if x.rank() != 4 {
            return Err(TensorError::RankMismatch {
                op: "global_avg_pool",
                expected: 4,
                shape: x.shape().to_vec(),
            });
        }
        let (n, c, h, w) = (x.shape()[0], x.shape()[1], x.shape()[2], x.shape()[3]);
        let spatial = h * w;
        let inv = E::one() / E::from_f64(spatial as f64);
        let xs = x.read();
        let mut data = vec![E::zero(); n * c];
        for (nc, slot) in data.iter_mut().enumerate() {
            let base = nc * spatial;
            let mut acc = E::zero();
            for s in 0..spatial {
                acc = acc + xs[base + s];
            }
            *slot = acc * inv;
        }
        drop(xs);
        let y = Tensor::new(data, &[n, c])?;
        Ok(self.finish(y, x.requires_grad(), |y| Recorded::GlobalAvgPool { x: x.clone(), y }))
    }

    /// `y[n,c,...] = e[n,c] * x[n,c,...]`, excitation broadcast over the
    /// spatial dims.
    pub fn mul_channel_broadcast(&mut self, x: &Tensor<E>, e: &Tensor<E>) -> Result<Tensor<E>> {
        if x.rank() < 2 || e.rank() != 2 || e.shape()[0] != x.shape()[0] || e.shape()[1] != x.shape()[1] {
            return Err(TensorError::ShapeMismatch {
                op: "mul_channel_broadcast",
                lhs: x.shape().to_vec(),
                rhs: e.shape().to_vec(),
            });
        }
        let spatial: usize = x.shape()[2..].iter().product();
        let ev = e.read();
        let data = x
            .read()
            .iter()
            .enumerate()
            .map(|(i, &v)| v * ev[i / spatial])
            .collect();
        drop(ev);
        let y = Tensor::new(data, x.shape())?;
        let tracked = x.requires_grad() || e.requires_grad();
        Ok(self.finish(y, tracked, |y| {
            Recorded::MulChannelBroadcast { x: x.clone(), e: e.clone(), y }
        }))
    }

    /// Concatenate along axis 1; all other dims must agree.
    pub fn concat_channels(&mut self, a: &Tensor<E>, b: &Tensor<E>) -> Result<Tensor<E>> {
        let mismatch = a.rank() < 2
            || a.rank() != b.rank()
            || a.shape()[0] != b.shape()[0]
            || a.shape()[2..] != b.shape()[2..];
        if mismatch {
            return Err(TensorError::ShapeMismatch {
                op: "concat_channels",
                lhs: a.shape().to_vec(),
                rhs: b.shape().to_vec(),
            });
        }
        let n = a.shape()[0];
        let (ca, cb) = (a.shape()[1], b.shape()[1]);
        let spatial: usize = a.shape()[2..].iter().product();
        let (block_a, block_b) = (ca * spatial, cb * spatial);
        let av = a.read();
        let bv = b.read();
        let mut data = Vec::with_capacity(n * (block_a + block_b));
        for i in 0..n {
            data.extend_from_slice(&av[i * block_a..(i + 1) * block_a]);
            data.extend_from_slice(&bv[i * block_b..(i + 1) * block_b]);
        }
        drop(av);
        drop(bv);
        let mut shape = a.shape().to_vec();
        shape[1] = ca + cb;
        let y = Tensor::new(data, &shape)?;
        let tracked = a.requires_grad() || b.requires_grad();
        Ok(self.finish(y, tracked, |y| {
            Recorded::ConcatChannels { a: a.clone(), b: b.clone(), y }
        }))
    }

    /// Same data, new shape with identical element count.
    pub fn reshape(&mut self, x: &Tensor<E>, shape: &[usize]) -> Result<Tensor<E>> {
        let y = Tensor::new(x.to_vec(), shape)?;
        Ok(self.finish(y, x.requires_grad(), |y| Recorded::Reshape { x: x.clone(), y }))
    }

    /// Elementwise multiply by a fixed mask (inverted dropout).
    pub fn apply_mask(&mut self, x: &Tensor<E>, mask: Vec<E>) -> Result<Tensor<E>> {
        if mask.len() != x.numel() {
            return Err(TensorError::ShapeDataMismatch {
                shape: x.shape().to_vec(),
                data_len: mask.len(),
            });
        }
        let data = x.read().iter().zip(mask.iter()).map(|(&v, &m)| v * m).collect();
        let y = Tensor::new(data, x.shape())?;
        Ok(self.finish(y, x.requires_grad(), |y| Recorded::ApplyMask { x: x.clone(), mask, y }))
    }

    /// Per-channel affine map with constant coefficients (batch-norm
    /// inference path). Gradients flow to `x` only.
    pub fn channel_affine(&mut self, x: &Tensor<E>, scale: Vec<E>, shift: Vec<E>) -> Result<Tensor<E>> {
        let c = if x.rank() >= 2 { x.shape()[1] } else { 0 };
        if scale.len() != c || shift.len() != c {
            return Err(TensorError::ShapeMismatch {
                op: "channel_affine",
                lhs: x.shape().to_vec(),
                rhs: vec![scale.len()],
            });
        }
        let spatial: usize = x.shape()[2..].iter().product();
        let data = x
            .read()
            .iter()
            .enumerate()
            .map(|(i, &v)| {
                let ch = (i / spatial) % c;
                v * scale[ch] + shift[ch]
            })
            .collect();
        let y = Tensor::new(data, x.shape())?;
        Ok(self.finish(y, x.requires_grad(), |y| Recorded::ChannelAffine { x: x.clone(), scale, y }))
    }

    /// Training-mode batch normalization over the channel axis of a
    /// `[n,c]` or `[n,c,h,w]` tensor using biased batch statistics.
    ///
    /// Returns the normalized output plus the per-channel batch mean and
    /// variance so the caller can maintain running statistics.
    pub fn batch_norm(
        &mut self,
        x: &Tensor<E>,
        gamma: &Tensor<E>,
        beta: &Tensor<E>,
        epsilon: E,
    ) -> Result<(Tensor<E>, Vec<E>, Vec<E>)> {
        if x.rank() != 2 && x.rank() != 4 {
            return Err(TensorError::RankMismatch { op: "batch_norm", expected: 2, shape: x.shape().to_vec() });
        }
        let (n, c) = (x.shape()[0], x.shape()[1]);
        if gamma.numel() != c || beta.numel() != c {
            return Err(TensorError::ShapeMismatch {
                op: "batch_norm",
                lhs: x.shape().to_vec(),
                rhs: gamma.shape().to_vec(),
            });
        }
        if n < 2 {
            return Err(TensorError::BatchTooSmall { batch: n });
        }
        let spatial: usize = x.shape()[2..].iter().product();
        let m = E::from_f64((n * spatial) as f64);
        let xs = x.read();
        let mut mean = vec![E::zero(); c];
        let mut var = vec![E::zero(); c];
        for ci in 0..c {
            let mut acc = E::zero();
            for ni in 0..n {
                let base = (ni * c + ci) * spatial;
                for s in 0..spatial {
                    acc = acc + xs[base + s];
                }
            }
            mean[ci] = acc / m;
            let mut sq = E::zero();
            for ni in 0..n {
                let base = (ni * c + ci) * spatial;
                for s in 0..spatial {
                    let d = xs[base + s] - mean[ci];
                    sq = sq + d * d;
                }
            }
            var[ci] = sq / m;
        }
        let inv_std: Vec<E> = var.iter().map(|&v| E::one() / (v + epsilon).sqrt()).collect();
        let g = gamma.read();
        let b = beta.read();
        let mut x_hat = vec![E::zero(); xs.len()];
        let mut out = vec![E::zero(); xs.len()];
        for (i, &v) in xs.iter().enumerate() {
            let ch = (i / spatial) % c;
            let xh = (v - mean[ch]) * inv_std[ch];
            x_hat[i] = xh;
            out[i] = g[ch] * xh + b[ch];
        }
        drop(xs);
        drop(g);
        drop(b);
        let y = Tensor::new(out, x.shape())?;
        let tracked = x.requires_grad() || gamma.requires_grad() || beta.requires_grad();
        let y = self.finish(y, tracked, |y| Recorded::BatchNorm {
            x: x.clone(),
            gamma: gamma.clone(),
            beta: beta.clone(),
            y,
            x_hat,
            inv_std: inv_std.clone(),
        });
        Ok((y, mean, var))
    }

    /// Mean binary cross-entropy over a batch of probabilities, with
    /// probabilities clipped to `[clip, 1-clip]` before the log.
    pub fn bce_loss(&mut self, probs: &Tensor<E>, targets: &[E], clip: E) -> Result<Tensor<E>> {
        if probs.numel() != targets.len() {
            return Err(TensorError::ShapeMismatch {
                op: "bce_loss",
                lhs: probs.shape().to_vec(),
                rhs: vec![targets.len()],
            });
        }
        let one = E::one();
        let hi = one - clip;
        let clipped: Vec<E> = probs.read().iter().map(|&p| p.max(clip).min(hi)).collect();
        let n = E::from_f64(targets.len() as f64);
        let mut acc = E::zero();
        for (&p, &t) in clipped.iter().zip(targets) {
            acc = acc - (t * p.ln() + (one - t) * (one - p).ln());
        }
        let y = Tensor::scalar(acc / n);
        let targets = targets.to_vec();
        Ok(self.finish(y, probs.requires_grad(), |y| Recorded::BceLoss {
            probs: probs.clone(),
            targets,
            clipped,
            y,
        }))
    }

    // ── Reverse pass ────────────────────────────────────────────────────

    /// Run reverse-mode accumulation from a scalar loss. Consumes the
    /// record, so each recorded op is visited exactly once per tape.
    pub fn backward(&mut self, loss: &Tensor<E>) -> Result<()> {
        if !loss.is_scalar() {
            return Err(TensorError::NotScalar { shape: loss.shape().to_vec() });
        }
        loss.accumulate_grad(&[E::one()]);
        for rec in std::mem::take(&mut self.ops).iter().rev() {
            backward_op(rec);
        }
        Ok(())
    }
}

fn grad_of<E: Scalar>(t: &Tensor<E>) -> Option<Vec<E>> {
    t.grad()
}

fn backward_op<E: Scalar>(rec: &Recorded<E>) {
    match rec {
        Recorded::Sigmoid { x, y } => {
            if let Some(dy) = grad_of(y) {
                if x.requires_grad() {
                    let yv = y.read();
                    let dx: Vec<E> = dy
                        .iter()
                        .zip(yv.iter())
                        .map(|(&g, &s)| g * s * (E::one() - s))
                        .collect();
                    drop(yv);
                    x.accumulate_grad(&dx);
                }
            }
        }
        Recorded::Relu { x, y } => {
            if let Some(dy) = grad_of(y) {
                if x.requires_grad() {
                    let xv = x.read();
                    let dx: Vec<E> = dy
                        .iter()
                        .zip(xv.iter())
                        .map(|(&g, &v)| if v > E::zero() { g } else { E::zero() })
                        .collect();
                    drop(xv);
                    x.accumulate_grad(&dx);
                }
            }
        }
        Recorded::Add { a, b, y } => {
            if let Some(dy) = grad_of(y) {
                if a.requires_grad() {
                    a.accumulate_grad(&dy);
                }
                if b.requires_grad() {
                    b.accumulate_grad(&dy);
                }
            }
        }
        Recorded::Mul { a, b, y } => {
            if let Some(dy) = grad_of(y) {
                if a.requires_grad() {
                    let bv = b.read();
                    let da: Vec<E> = dy.iter().zip(bv.iter()).map(|(&g, &v)| g * v).collect();
                    drop(bv);
                    a.accumulate_grad(&da);
                }
                if b.requires_grad() {
                    let av = a.read();
                    let db: Vec<E> = dy.iter().zip(av.iter()).map(|(&g, &v)| g * v).collect();
                    drop(av);
                    b.accumulate_grad(&db);
                }
            }
        }
        Recorded::Scale { x, factor, y } => {
            if let Some(dy) = grad_of(y) {
                if x.requires_grad() {
                    let dx: Vec<E> = dy.iter().map(|&g| g * *factor).collect();
                    x.accumulate_grad(&dx);
                }
            }
        }
        Recorded::SumAll { x, y } => {
            if let Some(dy) = grad_of(y) {
                if x.requires_grad() {
                    x.accumulate_grad(&vec![dy[0]; x.numel()]);
                }
            }
        }
        Recorded::Matmul { a, b, y } => {
            if let Some(dy) = grad_of(y) {
                let (m, k) = (a.shape()[0], a.shape()[1]);
                let n = b.shape()[1];
                if a.requires_grad() {
                    // dA = dY @ B^T
                    let bt = ops::transpose(&b.read(), k, n);
                    let da = ops::matmul(&dy, &bt, m, n, k);
                    a.accumulate_grad(&da);
                }
                if b.requires_grad() {
                    // dB = A^T @ dY
                    let at = ops::transpose(&a.read(), m, k);
                    let db = ops::matmul(&at, &dy, k, m, n);
                    b.accumulate_grad(&db);
                }
            }
        }
        Recorded::AddRowBias { x, bias, y } => {
            if let Some(dy) = grad_of(y) {
                if x.requires_grad() {
                    x.accumulate_grad(&dy);
                }
                if bias.requires_grad() {
                    let m = bias.numel();
                    let mut db = vec![E::zero(); m];
                    for (i, &g) in dy.iter().enumerate() {
                        db[i % m] = db[i % m] + g;
                    }
                    bias.accumulate_grad(&db);
                }
            }
        }
        Recorded::AddChannelBias { x, bias, y } => {
            if let Some(dy) = grad_of(y) {
                if x.requires_grad() {
                    x.accumulate_grad(&dy);
                }
                if bias.requires_grad() {
                    let c = bias.numel();
                    let spatial: usize = x.shape()[2..].iter().product();
                    let mut db = vec![E::zero(); c];
                    for (i, &g) in dy.iter().enumerate() {
                        let ch = (i / spatial) % c;
                        db[ch] = db[ch] + g;
                    }
                    bias.accumulate_grad(&db);
                }
            }
        }
        Recorded::Conv2d { x, kernel, y, stride, padding } => {
            if let Some(dy) = grad_of(y) {
                let (n, c, h, w) = (x.shape()[0], x.shape()[1], x.shape()[2], x.shape()[3]);
                let (f, kh, kw) = (kernel.shape()[0], kernel.shape()[2], kernel.shape()[3]);
                let (dx, dk) = ops::conv2d_backward(
                    &dy,
                    &x.read(),
                    &kernel.read(),
                    n,
                    c,
                    h,
                    w,
                    f,
                    kh,
                    kw,
                    *stride,
                    *padding,
                );
                if x.requires_grad() {
                    x.accumulate_grad(&dx);
                }
                if kernel.requires_grad() {
                    kernel.accumulate_grad(&dk);
                }
            }
        }
        Recorded::GlobalAvgPool { x, y } => {
            if let Some(dy) = grad_of(y) {
                if x.requires_grad() {
                    let spatial: usize = x.shape()[2..].iter().product();
                    let inv = E::one() / E::from_f64(spatial as f64);
                    let mut dx = vec![E::zero(); x.numel()];
                    for (i, slot) in dx.iter_mut().enumerate() {
                        *slot = dy[i / spatial] * inv;
                    }
                    x.accumulate_grad(&dx);
                }
            }
        }
        Recorded::MulChannelBroadcast { x, e, y } => {
            if let Some(dy) = grad_of(y) {
                let spatial: usize = x.shape()[2..].iter().product();
                if x.requires_grad() {
                    let ev = e.read();
                    let dx: Vec<E> = dy
                        .iter()
                        .enumerate()
                        .map(|(i, &g)| g * ev[i / spatial])
                        .collect();
                    drop(ev);
                    x.accumulate_grad(&dx);
                }
                if e.requires_grad() {
                    let xv = x.read();
                    let mut de = vec![E::zero(); e.numel()];
                    for (i, &g) in dy.iter().enumerate() {
                        let nc = i / spatial;
                        de[nc] = de[nc] + g * xv[i];
                    }
                    drop(xv);
                    e.accumulate_grad(&de);
                }
            }
        }
        Recorded::ConcatChannels { a, b, y } => {
            if let Some(dy) = grad_of(y) {
                let n = a.shape()[0];
                let spatial: usize = a.shape()[2..].iter().product();
                let (block_a, block_b) = (a.shape()[1] * spatial, b.shape()[1] * spatial);
                let row = block_a + block_b;
                if a.requires_grad() {
                    let mut da = vec![E::zero(); a.numel()];
                    for i in 0..n {
                        da[i * block_a..(i + 1) * block_a]
                            .copy_from_slice(&dy[i * row..i * row + block_a]);
                    }
                    a.accumulate_grad(&da);
                }
                if b.requires_grad() {
                    let mut db = vec![E::zero(); b.numel()];
                    for i in 0..n {
                        db[i * block_b..(i + 1) * block_b]
                            .copy_from_slice(&dy[i * row + block_a..(i + 1) * row]);
                    }
                    b.accumulate_grad(&db);
                }
            }
        }
        Recorded::Reshape { x, y } => {
            if let Some(dy) = grad_of(y) {
                if x.requires_grad() {
                    x.accumulate_grad(&dy);
                }
            }
        }
        Recorded::ApplyMask { x, mask, y } => {
            if let Some(dy) = grad_of(y) {
                if x.requires_grad() {
                    let dx: Vec<E> = dy.iter().zip(mask.iter()).map(|(&g, &m)| g * m).collect();
                    x.accumulate_grad(&dx);
                }
            }
        }
        Recorded::ChannelAffine { x, scale, y } => {
            if let Some(dy) = grad_of(y) {
                if x.requires_grad() {
                    let c = scale.len();
                    let spatial: usize = x.shape()[2..].iter().product();
                    let dx: Vec<E> = dy
                        .iter()
                        .enumerate()
                        .map(|(i, &g)| g * scale[(i / spatial) % c])
                        .collect();
                    x.accumulate_grad(&dx);
                }
            }
        }
        Recorded::BatchNorm { x, gamma, beta, y, x_hat, inv_std } => {
            if let Some(dy) = grad_of(y) {
                let c = gamma.numel();
                let spatial: usize = x.shape()[2..].iter().product();
                let n = x.shape()[0];
                let m = E::from_f64((n * spatial) as f64);
                let g = gamma.read();

                // Per-channel sums of dx_hat and dx_hat * x_hat.
                let mut sum_dxh = vec![E::zero(); c];
                let mut sum_dxh_xh = vec![E::zero(); c];
                for (i, &gy) in dy.iter().enumerate() {
                    let ch = (i / spatial) % c;
                    let dxh = gy * g[ch];
                    sum_dxh[ch] = sum_dxh[ch] + dxh;
                    sum_dxh_xh[ch] = sum_dxh_xh[ch] + dxh * x_hat[i];
                }

                if x.requires_grad() {
                    let mut dx = vec![E::zero(); x.numel()];
                    for (i, &gy) in dy.iter().enumerate() {
                        let ch = (i / spatial) % c;
                        let dxh = gy * g[ch];
                        dx[i] = inv_std[ch] / m
                            * (m * dxh - sum_dxh[ch] - x_hat[i] * sum_dxh_xh[ch]);
                    }
                    x.accumulate_grad(&dx);
                }
                drop(g);
                if gamma.requires_grad() {
                    let mut dg = vec![E::zero(); c];
                    for (i, &gy) in dy.iter().enumerate() {
                        let ch = (i / spatial) % c;
                        dg[ch] = dg[ch] + gy * x_hat[i];
                    }
                    gamma.accumulate_grad(&dg);
                }
                if beta.requires_grad() {
                    let mut db = vec![E::zero(); c];
                    for (i, &gy) in dy.iter().enumerate() {
                        let ch = (i / spatial) % c;
                        db[ch] = db[ch] + gy;
                    }
                    beta.accumulate_grad(&db);
                }
            }
        }
        Recorded::BceLoss { probs, targets, clipped, y } => {
            if let Some(dy) = grad_of(y) {
                if probs.requires_grad() {
                    let one = E::one();
                    let n = E::from_f64(targets.len() as f64);
                    let pv = probs.read();
                    let dp: Vec<E> = pv
                        .iter()
                        .zip(clipped.iter().zip(targets.iter()))
                        .map(|(&p, (&pc, &t))| {
                            if p != pc {
                                // Clipped: the clamp has zero derivative.
                                E::zero()
                            } else {
                                dy[0] * ((one - t) / (one - pc) - t / pc) / n
                            }
                        })
                        .collect();
                    drop(pv);
                    probs.accumulate_grad(&dp);
                }
            }
        }
    }
}
