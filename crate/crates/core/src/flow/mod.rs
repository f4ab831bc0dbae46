//! The invertible vocoder.
//!
//! A segment of `N` samples is squeezed into `group_size` channels, then
//! passed through `n_flows` flows, each an invertible 1×1 convolution
//! followed by an affine coupling layer conditioned on the upsampled mel
//! spectrogram. Every `early_every` flows, `early_size` channels leave the
//! stack and go straight to the latent. The forward direction gives the
//! exact log-likelihood; the inverse direction synthesises audio.

mod config;
mod coupling;
mod invconv;
mod loss;
mod model;
mod sampling;
mod squeeze;
mod verify;
mod wavenet;

use thiserror::Error;

use crate::numerics::NumericsError;

pub use config::{FlowConfig, Upsampler};
pub use coupling::{coupling_forward, coupling_inverse, split_point};
pub use invconv::{invconv_backward, invconv_forward, invconv_inverse, log_abs_det, SINGULAR_DET};
pub use loss::{loss_and_grad, negative_log_likelihood, LossBreakdown};
pub use model::{FlowModel, FlowStep, ForwardCache, ForwardResult};
pub use sampling::{infer, sample_latent};
pub use squeeze::{squeeze, unsqueeze, upsample_condition};
pub use verify::{
    check_grad, check_jacobian, check_roundtrip, numerical_log_det, CheckMode, CheckReport, GRAD_TOLERANCE,
    JACOBIAN_TOLERANCE, ROUNDTRIP_TOLERANCE,
};
pub use wavenet::{WaveNet, WnCache, WnLayer};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum FlowError {
    #[error("invalid flow configuration: {0}")]
    Config(String),
    #[error("segment length {len} is not divisible by group size {group_size}")]
    NotDivisible { len: usize, group_size: usize },
    #[error("mel spectrogram too short: needs {needed} frames, has {available}")]
    MelTooShort { needed: usize, available: usize },
    #[error("1x1 convolution weight is singular (det {det:e})")]
    SingularW { det: f64 },
    #[error("1x1 convolution weight of flow {flow} is singular (det {det:e})")]
    SingularAt { flow: usize, det: f64 },
    #[error("coupling network produced a non-finite log scale")]
    NonFiniteScale,
    #[error("non-finite {0}")]
    NonFinite(String),
    #[error("sigma must be positive and finite, got {0}")]
    InvalidSigma(f64),
    #[error("shape mismatch: {0}")]
    ShapeMismatch(String),
    #[error(transparent)]
    Numerics(#[from] NumericsError),
}

impl FlowError {
    pub(crate) fn at_flow(self, flow: usize) -> Self {
        match self {
            FlowError::SingularW { det } => FlowError::SingularAt { flow, det },
            other => other,
        }
    }
}
