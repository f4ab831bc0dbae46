//! Differentiable building blocks for the coupling networks.
//!
//! Every primitive comes as a forward function plus an explicit backward
//! function returning the adjoints. There is no tape: the flow code calls
//! the backward rules itself, in reverse order.

mod activation;
mod conv;
mod gradcheck;
pub mod linalg;
mod tensor;

pub use activation::{gated_activation, gated_activation_backward, sigmoid};
pub use conv::{
    dilated_conv1d_backward, dilated_conv1d_forward, pointwise_conv, pointwise_conv_backward,
    ConvGrads,
};
pub use gradcheck::{grad_check, grad_check_coords, relative_error, GRAD_CHECK_FLOOR};
pub use tensor::{Real, Tensor};

use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum NumericsError {
    #[error("shape mismatch in {op}: {detail}")]
    ShapeMismatch { op: &'static str, detail: String },
}

pub(crate) fn shape_err(op: &'static str, detail: impl Into<String>) -> NumericsError {
    NumericsError::ShapeMismatch { op, detail: detail.into() }
}
