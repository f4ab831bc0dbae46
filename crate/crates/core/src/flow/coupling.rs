//! Affine coupling: the first `⌈C/2⌉` channels pass through and drive the
//! network; the remaining channels are scaled by `exp(log_s)` and shifted
//! by `b`.

use crate::numerics::{Real, Tensor};

use super::wavenet::{WaveNet, WnCache};
use super::FlowError;

pub fn split_point(channels: usize) -> usize {
    channels.div_ceil(2)
}

#[derive(Clone, Debug)]
pub struct CouplingCache<T> {
    x_b: Tensor<T>,
    scale: Tensor<T>,
    net: WnCache<T>,
}

fn split_output<T: Real>(out: &Tensor<T>, n_out: usize) -> (Tensor<T>, Tensor<T>) {
    (out.rows_range(0, n_out), out.rows_range(n_out, 2 * n_out))
}

fn check<T: Real>(x: &Tensor<T>, net: &WaveNet<T>) -> Result<usize, FlowError> {
    let (c, _) = x.dims2();
    let half = split_point(c);
    if net.start_weight.dims2().1 != half || net.n_out() != c - half {
        return Err(FlowError::ShapeMismatch(format!(
            "coupling network expects {}+{} channels, input has {c}",
            net.start_weight.dims2().1,
            net.n_out()
        )));
    }
    Ok(half)
}

fn finite_scale<T: Real>(log_s: &Tensor<T>) -> Result<(), FlowError> {
    if log_s.all_finite() { Ok(()) } else { Err(FlowError::NonFiniteScale) }
}

fn transform<T: Real>(
    x: &Tensor<T>,
    cond: &Tensor<T>,
    net: &WaveNet<T>,
    keep: bool,
) -> Result<(Tensor<T>, f64, Option<CouplingCache<T>>), FlowError> {
    let half = check(x, net)?;
    let c = x.dims2().0;
    let x_a = x.rows_range(0, half);
    let x_b = x.rows_range(half, c);
    let (out, net_cache) = if keep {
        let (o, k) = net.forward_cached(&x_a, cond)?;
        (o, Some(k))
    } else {
        (net.forward(&x_a, cond)?, None)
    };
    let (log_s, b) = split_output(&out, c - half);
    finite_scale(&log_s)?;
    let scale = log_s.map(T::exp);
    let mut y_b = x_b.clone();
    for ((y, &s), &bias) in y_b.data_mut().iter_mut().zip(scale.data()).zip(b.data()) {
        *y = *y * s + bias;
    }
    let sum_log_s = log_s.data().iter().map(|v| v.as_f64()).sum();
    let y = Tensor::concat_rows(&[&x_a, &y_b])?;
    let cache = net_cache.map(|net| CouplingCache { x_b, scale, net });
    Ok((y, sum_log_s, cache))
}

/// Returns `(y, Σ log_s)`.
pub fn coupling_forward<T: Real>(x: &Tensor<T>, cond: &Tensor<T>, net: &WaveNet<T>) -> Result<(Tensor<T>, f64), FlowError> {
    let (y, s, _) = transform(x, cond, net, false)?;
    Ok((y, s))
}

pub(crate) fn coupling_forward_cached<T: Real>(
    x: &Tensor<T>,
    cond: &Tensor<T>,
    net: &WaveNet<T>,
) -> Result<(Tensor<T>, f64, CouplingCache<T>), FlowError> {
    let (y, s, k) = transform(x, cond, net, true)?;
    Ok((y, s, k.expect("cache requested")))
}

/// `x_b = (y_b - b) · exp(-log_s)` with `(log_s, b)` recomputed from `y_a`.
pub fn coupling_inverse<T: Real>(y: &Tensor<T>, cond: &Tensor<T>, net: &WaveNet<T>) -> Result<Tensor<T>, FlowError> {
    let half = check(y, net)?;
    let c = y.dims2().0;
    let y_a = y.rows_range(0, half);
    let mut x_b = y.rows_range(half, c);
    let out = net.forward(&y_a, cond)?;
    let (log_s, b) = split_output(&out, c - half);
    finite_scale(&log_s)?;
    for ((v, &ls), &bias) in x_b.data_mut().iter_mut().zip(log_s.data()).zip(b.data()) {
        *v = (*v - bias) * (-ls).exp();
    }
    Ok(Tensor::concat_rows(&[&y_a, &x_b])?)
}

/// Backward through the coupling given `∂L/∂y` and the weight `∂L/∂(Σ log_s)`.
/// Accumulates network gradients into `grads` and returns `∂L/∂x`.
pub(crate) fn coupling_backward<T: Real>(
    grad_y: &Tensor<T>,
    grad_sum_log_s: T,
    cache: &CouplingCache<T>,
    cond: &Tensor<T>,
    net: &WaveNet<T>,
    grads: &mut WaveNet<T>,
) -> Result<Tensor<T>, FlowError> {
    let c = grad_y.dims2().0;
    let half = split_point(c);
    let gy_a = grad_y.rows_range(0, half);
    let gy_b = grad_y.rows_range(half, c);
    let mut grad_x_b = gy_b.clone();
    let mut grad_log_s = gy_b.clone();
    for (((gx, gl), &s), &xb) in grad_x_b
        .data_mut()
        .iter_mut()
        .zip(grad_log_s.data_mut())
        .zip(cache.scale.data())
        .zip(cache.x_b.data())
    {
        let g = *gx;
        *gx = g * s;
        *gl = g * xb * s + grad_sum_log_s;
    }
    let grad_out = Tensor::concat_rows(&[&grad_log_s, &gy_b])?;
    let mut grad_x_a = net.backward(&grad_out, &cache.net, cond, grads)?;
    grad_x_a.accumulate(&gy_a)?;
    Ok(Tensor::concat_rows(&[&grad_x_a, &grad_x_b])?)
}
