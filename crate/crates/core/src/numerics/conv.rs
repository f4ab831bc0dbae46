use rayon::prelude::*;

use super::{shape_err, NumericsError, Real, Tensor};

/// Adjoints of a convolution with respect to its three inputs.
#[derive(Clone, Debug, PartialEq)]
pub struct ConvGrads<T> {
    pub input: Tensor<T>,
    pub weight: Tensor<T>,
    pub bias: Tensor<T>,
}

#[inline]
fn axpy<T: Real>(alpha: T, x: &[T], y: &mut [T]) {
    for (yv, &xv) in y.iter_mut().zip(x) {
        *yv += alpha * xv;
    }
}

/// Eight independent partial sums so the loop vectorises; the summation
/// order is fixed, so results do not depend on threading.
#[inline]
fn dot<T: Real>(a: &[T], b: &[T]) -> T {
    const LANES: usize = 8;
    let mut acc = [T::zero(); LANES];
    let ca = a.chunks_exact(LANES);
    let cb = b.chunks_exact(LANES);
    let tail = ca.remainder().iter().zip(cb.remainder()).fold(T::zero(), |s, (&x, &y)| s + x * y);
    for (xa, xb) in ca.zip(cb) {
        for l in 0..LANES {
            acc[l] += xa[l] * xb[l];
        }
    }
    acc.iter().fold(tail, |s, &v| s + v)
}

#[inline]
fn sum<T: Real>(a: &[T]) -> T {
    const LANES: usize = 8;
    let mut acc = [T::zero(); LANES];
    let chunks = a.chunks_exact(LANES);
    let tail = chunks.remainder().iter().fold(T::zero(), |s, &x| s + x);
    for c in chunks {
        for l in 0..LANES {
            acc[l] += c[l];
        }
    }
    acc.iter().fold(tail, |s, &v| s + v)
}

/// Valid output range `[t0, t1)` and input shift for tap offset `off`.
#[inline]
fn tap_range(off: isize, len: usize) -> (usize, usize) {
    let t0 = if off < 0 { (-off) as usize } else { 0 };
    let t1 = if off > 0 { len.saturating_sub(off as usize) } else { len };
    (t0.min(len), t1.max(t0.min(len)))
}

fn check_conv_shapes<T: Real>(
    op: &'static str,
    input: &Tensor<T>,
    weight: &Tensor<T>,
    bias: &Tensor<T>,
    dilation: usize,
) -> Result<(usize, usize, usize, usize), NumericsError> {
    if input.shape().len() != 2 {
        return Err(shape_err(op, format!("input must be [C_in x T], got {:?}", input.shape())));
    }
    let (c_in, t) = input.dims2();
    let &[c_out, w_in, kernel] = weight.shape() else {
        return Err(shape_err(op, format!("weight must be 3-D, got {:?}", weight.shape())));
    };
    if w_in != c_in {
        return Err(shape_err(op, format!("weight expects {w_in} input channels, input has {c_in}")));
    }
    if kernel % 2 == 0 {
        return Err(shape_err(op, format!("kernel size {kernel} must be odd")));
    }
    if dilation == 0 {
        return Err(shape_err(op, "dilation must be positive"));
    }
    if bias.shape() != [c_out] {
        return Err(shape_err(op, format!("bias shape {:?}, expected [{c_out}]", bias.shape())));
    }
    Ok((c_in, c_out, kernel, t))
}

/// Dilated 1-D cross-correlation with zero "same" padding.
///
/// `out[c, t] = bias[c] + Σ_{i,k} weight[c, i, k] · input[i, t + (k - (K-1)/2)·dilation]`,
/// with out-of-range input taps reading as zero.
pub fn dilated_conv1d_forward<T: Real>(
    input: &Tensor<T>,
    weight: &Tensor<T>,
    bias: &Tensor<T>,
    dilation: usize,
) -> Result<Tensor<T>, NumericsError> {
    let (c_in, c_out, kernel, t) = check_conv_shapes("dilated_conv1d_forward", input, weight, bias, dilation)?;
    let half = (kernel - 1) / 2;
    let w = weight.data();
    let x = input.data();
    let mut out = Tensor::zeros(&[c_out, t]);
    if t == 0 {
        return Ok(out);
    }
    out.data_mut().par_chunks_mut(t).enumerate().for_each(|(c, row)| {
        row.iter_mut().for_each(|v| *v = bias.data()[c]);
        for i in 0..c_in {
            let xi = &x[i * t..(i + 1) * t];
            for k in 0..kernel {
                let wv = w[(c * c_in + i) * kernel + k];
                let off = (k as isize - half as isize) * dilation as isize;
                let (t0, t1) = tap_range(off, t);
                if t0 >= t1 {
                    continue;
                }
                let s0 = (t0 as isize + off) as usize;
                axpy(wv, &xi[s0..s0 + (t1 - t0)], &mut row[t0..t1]);
            }
        }
    });
    Ok(out)
}

/// Exact adjoints of [`dilated_conv1d_forward`].
pub fn dilated_conv1d_backward<T: Real>(
    grad_out: &Tensor<T>,
    input: &Tensor<T>,
    weight: &Tensor<T>,
    dilation: usize,
) -> Result<ConvGrads<T>, NumericsError> {
    let c_out = weight.shape().first().copied().unwrap_or(0);
    let bias_probe = Tensor::zeros(&[c_out]);
    let (c_in, c_out, kernel, t) =
        check_conv_shapes("dilated_conv1d_backward", input, weight, &bias_probe, dilation)?;
    if grad_out.shape() != [c_out, t] {
        return Err(shape_err(
            "dilated_conv1d_backward",
            format!("grad_out shape {:?}, expected [{c_out}, {t}]", grad_out.shape()),
        ));
    }
    let half = (kernel - 1) / 2;
    let w = weight.data();
    let x = input.data();
    let g = grad_out.data();

    let mut grad_input = Tensor::zeros(&[c_in, t]);
    let mut grad_weight = Tensor::zeros(&[c_out, c_in, kernel]);
    let mut grad_bias = Tensor::zeros(&[c_out]);
    if t == 0 {
        return Ok(ConvGrads { input: grad_input, weight: grad_weight, bias: grad_bias });
    }

    grad_input.data_mut().par_chunks_mut(t).enumerate().for_each(|(i, gi)| {
        for c in 0..c_out {
            let gc = &g[c * t..(c + 1) * t];
            for k in 0..kernel {
                let wv = w[(c * c_in + i) * kernel + k];
                let off = (k as isize - half as isize) * dilation as isize;
                let (t0, t1) = tap_range(off, t);
                if t0 >= t1 {
                    continue;
                }
                let s0 = (t0 as isize + off) as usize;
                axpy(wv, &gc[t0..t1], &mut gi[s0..s0 + (t1 - t0)]);
            }
        }
    });

    grad_weight
        .data_mut()
        .par_chunks_mut(c_in * kernel)
        .enumerate()
        .for_each(|(c, gw)| {
            let gc = &g[c * t..(c + 1) * t];
            for i in 0..c_in {
                let xi = &x[i * t..(i + 1) * t];
                for k in 0..kernel {
                    let off = (k as isize - half as isize) * dilation as isize;
                    let (t0, t1) = tap_range(off, t);
                    if t0 >= t1 {
                        continue;
                    }
                    let s0 = (t0 as isize + off) as usize;
                    gw[i * kernel + k] = dot(&gc[t0..t1], &xi[s0..s0 + (t1 - t0)]);
                }
            }
        });

    for (c, gb) in grad_bias.data_mut().iter_mut().enumerate() {
        *gb = sum(&g[c * t..(c + 1) * t]);
    }
    Ok(ConvGrads { input: grad_input, weight: grad_weight, bias: grad_bias })
}

fn check_pointwise<T: Real>(
    op: &'static str,
    input: &Tensor<T>,
    weight: &Tensor<T>,
    bias: Option<&Tensor<T>>,
) -> Result<(usize, usize, usize), NumericsError> {
    if input.shape().len() != 2 || weight.shape().len() != 2 {
        return Err(shape_err(
            op,
            format!("input {:?} and weight {:?} must be 2-D", input.shape(), weight.shape()),
        ));
    }
    let (c_in, t) = input.dims2();
    let (c_out, w_in) = weight.dims2();
    if w_in != c_in {
        return Err(shape_err(op, format!("weight expects {w_in} input channels, input has {c_in}")));
    }
    if let Some(b) = bias {
        if b.shape() != [c_out] {
            return Err(shape_err(op, format!("bias shape {:?}, expected [{c_out}]", b.shape())));
        }
    }
    Ok((c_in, c_out, t))
}

/// Per-time-step dense map: `out[:, t] = weight · input[:, t] + bias`.
pub fn pointwise_conv<T: Real>(
    input: &Tensor<T>,
    weight: &Tensor<T>,
    bias: Option<&Tensor<T>>,
) -> Result<Tensor<T>, NumericsError> {
    let (c_in, c_out, t) = check_pointwise("pointwise_conv", input, weight, bias)?;
    let x = input.data();
    let w = weight.data();
    let mut out = Tensor::zeros(&[c_out, t]);
    if t == 0 {
        return Ok(out);
    }
    out.data_mut().par_chunks_mut(t).enumerate().for_each(|(c, row)| {
        if let Some(b) = bias {
            row.iter_mut().for_each(|v| *v = b.data()[c]);
        }
        for i in 0..c_in {
            axpy(w[c * c_in + i], &x[i * t..(i + 1) * t], row);
        }
    });
    Ok(out)
}

/// Adjoints of [`pointwise_conv`]. The bias gradient is returned even when
/// the forward pass had no bias; callers ignore it in that case.
pub fn pointwise_conv_backward<T: Real>(
    grad_out: &Tensor<T>,
    input: &Tensor<T>,
    weight: &Tensor<T>,
) -> Result<ConvGrads<T>, NumericsError> {
    let (c_in, c_out, t) = check_pointwise("pointwise_conv_backward", input, weight, None)?;
    if grad_out.shape() != [c_out, t] {
        return Err(shape_err(
            "pointwise_conv_backward",
            format!("grad_out shape {:?}, expected [{c_out}, {t}]", grad_out.shape()),
        ));
    }
    let x = input.data();
    let w = weight.data();
    let g = grad_out.data();
    let mut grad_input = Tensor::zeros(&[c_in, t]);
    let mut grad_weight = Tensor::zeros(&[c_out, c_in]);
    let mut grad_bias = Tensor::zeros(&[c_out]);
    if t == 0 {
        return Ok(ConvGrads { input: grad_input, weight: grad_weight, bias: grad_bias });
    }
    grad_input.data_mut().par_chunks_mut(t).enumerate().for_each(|(i, gi)| {
        for c in 0..c_out {
            axpy(w[c * c_in + i], &g[c * t..(c + 1) * t], gi);
        }
    });
    grad_weight.data_mut().par_chunks_mut(c_in).enumerate().for_each(|(c, gw)| {
        let gc = &g[c * t..(c + 1) * t];
        for (i, v) in gw.iter_mut().enumerate() {
            *v = dot(gc, &x[i * t..(i + 1) * t]);
        }
    });
    for (c, gb) in grad_bias.data_mut().iter_mut().enumerate() {
        *gb = sum(&g[c * t..(c + 1) * t]);
    }
    Ok(ConvGrads { input: grad_input, weight: grad_weight, bias: grad_bias })
}
