//! A flow-based neural vocoder toolkit.
//!
//! The pipeline has three halves that share one set of numeric primitives:
//!
//! * [`dsp`] turns 22.05 kHz mono audio into 80-band log-mel spectrograms.
//! * [`flow`] is the invertible model: audio is squeezed into groups of
//!   samples, pushed through alternating invertible 1×1 convolutions and
//!   affine coupling layers, and mapped onto an isotropic Gaussian latent.
//!   The same stack run backwards turns Gaussian noise plus a mel
//!   spectrogram into a waveform.
//! * [`training`] maximises the exact log-likelihood with Adam and writes
//!   bit-reproducible checkpoints.
//!
//! [`corpus`] handles manifest bookkeeping and [`evaluation`] computes mean
//! opinion scores from listening-test ratings.

pub mod corpus;
pub mod dsp;
pub mod evaluation;
pub mod flow;
pub mod numerics;
pub mod textmap;
pub mod training;

pub use numerics::{Real, Tensor};
