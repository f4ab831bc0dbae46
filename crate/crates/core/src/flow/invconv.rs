//! Invertible 1×1 convolution: a learned `C × C` matrix applied per frame.

use crate::numerics::linalg::Lu;
use crate::numerics::{pointwise_conv, pointwise_conv_backward, Real, Tensor};

use super::FlowError;

/// `|det W|` below this is treated as singular.
pub const SINGULAR_DET: f64 = 1e-12;

fn factor<T: Real>(w: &Tensor<T>) -> Result<(Lu, usize), FlowError> {
    let (n, m) = w.dims2();
    if n != m {
        return Err(FlowError::ShapeMismatch(format!("1x1 conv weight must be square, got {n}x{m}")));
    }
    let a: Vec<f64> = w.data().iter().map(|v| v.as_f64()).collect();
    let lu = Lu::new(&a, n).ok_or(FlowError::SingularW { det: 0.0 })?;
    let det = lu.det();
    if !(det.abs() >= SINGULAR_DET) {
        return Err(FlowError::SingularW { det });
    }
    Ok((lu, n))
}

/// `ln |det W|`, failing on singular matrices.
pub fn log_abs_det<T: Real>(w: &Tensor<T>) -> Result<f64, FlowError> {
    Ok(factor(w)?.0.log_abs_det())
}

/// `y[:, t] = W · x[:, t]`; returns `(y, T · ln |det W|)`.
pub fn invconv_forward<T: Real>(x: &Tensor<T>, w: &Tensor<T>) -> Result<(Tensor<T>, f64), FlowError> {
    let (lu, _) = factor(w)?;
    let frames = x.dims2().1;
    let y = pointwise_conv(x, w, None)?;
    Ok((y, frames as f64 * lu.log_abs_det()))
}

/// Applies `W⁻¹` per frame.
pub fn invconv_inverse<T: Real>(y: &Tensor<T>, w: &Tensor<T>) -> Result<Tensor<T>, FlowError> {
    let (lu, n) = factor(w)?;
    let inv = Tensor::from_vec(&[n, n], lu.inverse().into_iter().map(T::lit).collect())?;
    Ok(pointwise_conv(y, &inv, None)?)
}

/// Backward through `y = W x` plus `coeff · T · ln |det W|`.
///
/// Returns `(∂L/∂x, ∂L/∂W)` where `∂L/∂W = dy · xᵀ + coeff · T · W⁻ᵀ`.
pub fn invconv_backward<T: Real>(
    grad_y: &Tensor<T>,
    x: &Tensor<T>,
    w: &Tensor<T>,
    log_det_coeff: T,
) -> Result<(Tensor<T>, Tensor<T>), FlowError> {
    let (lu, n) = factor(w)?;
    let frames = x.dims2().1;
    let g = pointwise_conv_backward(grad_y, x, w)?;
    let inv = lu.inverse();
    let mut grad_w = g.weight;
    let scale = log_det_coeff.as_f64() * frames as f64;
    for r in 0..n {
        for c in 0..n {
            // (W⁻ᵀ)[r, c] = (W⁻¹)[c, r]
            grad_w.data_mut()[r * n + c] += T::lit(scale * inv[c * n + r]);
        }
    }
    Ok((g.input, grad_w))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn eye(n: usize, s: f64) -> Tensor<f64> {
        let mut t = Tensor::zeros(&[n, n]);
        for i in 0..n {
            t.data_mut()[i * n + i] = s;
        }
        t
    }

    #[test]
    fn identity_is_a_no_op() {
        let x = Tensor::from_vec(&[2, 3], vec![1.0, 2.0, 3.0, 4.0, 5.0, 6.0]).unwrap();
        let (y, ld) = invconv_forward(&x, &eye(2, 1.0)).unwrap();
        assert_eq!(y, x);
        assert_eq!(ld, 0.0);
        assert_eq!(invconv_inverse(&x, &eye(2, 1.0)).unwrap(), x);
    }

    #[test]
    fn doubling_matrix_log_det() {
        let x = Tensor::zeros(&[8, 10]);
        let (_, ld) = invconv_forward(&x, &eye(8, 2.0)).unwrap();
        assert!((ld - 80.0 * 2f64.ln()).abs() < 1e-9);
        assert!((ld - 55.452).abs() < 1e-3);
    }

    #[test]
    fn scaled_identity_inverse_is_exact() {
        let x = Tensor::from_vec(&[2, 2], vec![0.25, -1.5, 3.0, 0.125]).unwrap();
        let y = x.map(|v| v * 2.0);
        assert_eq!(invconv_inverse(&y, &eye(2, 2.0)).unwrap(), x);
    }

    #[test]
    fn singular_rejected() {
        let w = Tensor::from_vec(&[2, 2], vec![1.0, 2.0, 2.0, 4.0]).unwrap();
        let x = Tensor::zeros(&[2, 1]);
        assert!(matches!(invconv_forward(&x, &w), Err(FlowError::SingularW { .. })));
        assert!(matches!(invconv_inverse(&x, &w), Err(FlowError::SingularW { .. })));
    }
}
