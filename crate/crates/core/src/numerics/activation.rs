use super::{shape_err, NumericsError, Real, Tensor};

#[inline]
pub fn sigmoid<T: Real>(x: T) -> T {
    T::one() / (T::one() + (-x).exp())
}

/// Gated unit `tanh(a) · σ(b)`, elementwise.
pub fn gated_activation<T: Real>(a: &Tensor<T>, b: &Tensor<T>) -> Result<Tensor<T>, NumericsError> {
    if a.shape() != b.shape() {
        return Err(shape_err("gated_activation", format!("{:?} vs {:?}", a.shape(), b.shape())));
    }
    let data = a.data().iter().zip(b.data()).map(|(&x, &y)| x.tanh() * sigmoid(y)).collect();
    Tensor::from_vec(a.shape(), data)
}

/// Returns `(∂L/∂a, ∂L/∂b)` given `∂L/∂out`.
pub fn gated_activation_backward<T: Real>(
    grad_out: &Tensor<T>,
    a: &Tensor<T>,
    b: &Tensor<T>,
) -> Result<(Tensor<T>, Tensor<T>), NumericsError> {
    if a.shape() != b.shape() || grad_out.shape() != a.shape() {
        return Err(shape_err(
            "gated_activation_backward",
            format!("{:?}, {:?}, {:?}", grad_out.shape(), a.shape(), b.shape()),
        ));
    }
    let n = a.len();
    let mut ga = Vec::with_capacity(n);
    let mut gb = Vec::with_capacity(n);
    for ((&g, &x), &y) in grad_out.data().iter().zip(a.data()).zip(b.data()) {
        let th = x.tanh();
        let sg = sigmoid(y);
        ga.push(g * (T::one() - th * th) * sg);
        gb.push(g * th * sg * (T::one() - sg));
    }
    Ok((Tensor::from_vec(a.shape(), ga)?, Tensor::from_vec(a.shape(), gb)?))
}
