//! Raw kernels shared by the forward ops and their backward rules.
//!
//! Everything here is a pure function over row-major slices; shape checking
//! happens in [`super::tape`] before these are reached.

use super::Scalar;

/// C[m,n] = A[m,k] @ B[k,n]
pub fn matmul<E: Scalar>(a: &[E], b: &[E], m: usize, k: usize, n: usize) -> Vec<E> {
    let mut out = vec![E::zero(); m * n];
    for i in 0..m {
        for p in 0..k {
            let av = a[i * k + p];
            if av == E::zero() {
                continue;
            }
            let row = &b[p * n..(p + 1) * n];
            let dst = &mut out[i * n..(i + 1) * n];
            for j in 0..n {
                dst[j] = dst[j] + av * row[j];
            }
        }
    }
    out
}

/// B[n,m] from A[m,n].
pub fn transpose<E: Scalar>(a: &[E], m: usize, n: usize) -> Vec<E> {
    let mut out = vec![E::zero(); m * n];
    for i in 0..m {
        for j in 0..n {
            out[j * m + i] = a[i * n + j];
        }
    }
    out
}

/// Output spatial extent of a convolution along one axis.
pub fn conv_out_extent(input: usize, kernel: usize, stride: usize, padding: usize) -> usize {
    (input + 2 * padding - kernel) / stride + 1
}

/// Cross-correlation (no kernel flip) with zero padding.
///
/// `x`: [N,C,H,W], `k`: [F,C,Kh,Kw] -> [N,F,OH,OW].
#[allow(clippy::too_many_arguments)]
pub fn conv2d_forward<E: Scalar>(
    x: &[E],
    k: &[E],
    n: usize,
    c: usize,
    h: usize,
    w: usize,
    f: usize,
    kh: usize,
    kw: usize,
    stride: usize,
    padding: usize,
) -> Vec<E> {
    let oh = conv_out_extent(h, kh, stride, padding);
    let ow = conv_out_extent(w, kw, stride, padding);
    let mut y = vec![E::zero(); n * f * oh * ow];
    for ni in 0..n {
        for fi in 0..f {
            for oy in 0..oh {
                for ox in 0..ow {
                    let mut acc = E::zero();
                    for ci in 0..c {
                        for ky in 0..kh {
                            let iy = (oy * stride + ky) as isize - padding as isize;
                            if iy < 0 || iy >= h as isize {
                                continue;
                            }
                            for kx in 0..kw {
                                let ix = (ox * stride + kx) as isize - padding as isize;
                                if ix < 0 || ix >= w as isize {
                                    continue;
                                }
                                let xi = ((ni * c + ci) * h + iy as usize) * w + ix as usize;
                                let ki = ((fi * c + ci) * kh + ky) * kw + kx;
                                acc = acc + x[xi] * k[ki];
                            }
                        }
                    }
                    y[((ni * f + fi) * oh + oy) * ow + ox] = acc;
                }
            }
        }
    }
    y
}

/// Gradients of [`conv2d_forward`] w.r.t. input and kernel.
#[allow(clippy::too_many_arguments)]
pub fn conv2d_backward<E: Scalar>(
    dy: &[E],
    x: &[E],
    k: &[E],
    n: usize,
    c: usize,
    h: usize,
    w: usize,
    f: usize,
    kh: usize,
    kw: usize,
    stride: usize,
    padding: usize,
) -> (Vec<E>, Vec<E>) {
    let oh = conv_out_extent(h, kh, stride, padding);
    let ow = conv_out_extent(w, kw, stride, padding);
    let mut dx = vec![E::zero(); n * c * h * w];
    let mut dk = vec![E::zero(); f * c * kh * kw];
    for ni in 0..n {
        for fi in 0..f {
            for oy in 0..oh {
                for ox in 0..ow {
                    let g = dy[((ni * f + fi) * oh + oy) * ow + ox];
                    if g == E::zero() {
                        continue;
                    }
                    for ci in 0..c {
                        for ky in 0..kh {
                            let iy = (oy * stride + ky) as isize - padding as isize;
                            if iy < 0 || iy >= h as isize {
                                continue;
                            }
                            for kx in 0..kw {
                                let ix = (ox * stride + kx) as isize - padding as isize;
                                if ix < 0 || ix >= w as isize {
                                    continue;
                                }
                                let xi = ((ni * c + ci) * h + iy as usize) * w + ix as usize;
                                let ki = ((fi * c + ci) * kh + ky) * kw + kx;
                                dx[xi] = dx[xi] + g * k[ki];
                                dk[ki] = dk[ki] + g * x[xi];
                            }
                        }
                    }
                }
            }
        }
    }
    (dx, dk)
}

/// Numerically stable logistic function, saturating to the nearest
/// representable values strictly inside (0,1).
pub fn sigmoid_scalar<E: Scalar>(x: E) -> E {
    let one = E::one();
    let y = if x >= E::zero() {
        one / (one + (-x).exp())
    } else {
        let ex = x.exp();
        ex / (one + ex)
    };
    let two = one + one;
    y.max(E::min_positive_value()).min(one - E::epsilon() / two)
}
