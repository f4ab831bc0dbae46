use rand::Rng;
use rand_distr::{Distribution, Normal};

use crate::dsp::{AudioClip, MelSpectrogram};
use crate::numerics::{Real, Tensor};

use super::{FlowError, FlowModel};

/// `n_entries` i.i.d. draws from `N(0, sigma²)`.
pub fn sample_latent<T: Real, R: Rng + ?Sized>(n_entries: usize, sigma: f64, rng: &mut R) -> Result<Vec<T>, FlowError> {
    if !(sigma > 0.0 && sigma.is_finite()) {
        return Err(FlowError::InvalidSigma(sigma));
    }
    let normal = Normal::new(0.0, sigma).map_err(|_| FlowError::InvalidSigma(sigma))?;
    Ok((0..n_entries).map(|_| T::lit(normal.sample(rng))).collect())
}

/// Vocodes a mel spectrogram: Gaussian latent through the inverse flow.
///
/// The output covers the source clip length when the features carry it,
/// otherwise `n_frames · hop` samples, rounded down to whole groups.
pub fn infer<R: Rng + ?Sized>(
    mel: &MelSpectrogram,
    model: &FlowModel<f32>,
    sigma: f64,
    rng: &mut R,
) -> Result<AudioClip, FlowError> {
    if mel.n_frames == 0 {
        return Err(FlowError::ShapeMismatch("empty mel spectrogram".into()));
    }
    let group = model.config().group_size;
    let frames = mel.covered_samples() / group;
    if frames == 0 {
        return Err(FlowError::ShapeMismatch("mel covers less than one group of samples".into()));
    }
    let z = Tensor::from_vec(&[group, frames], sample_latent(group * frames, sigma, rng)?)?;
    let samples = model.inverse(&z, mel)?;
    Ok(AudioClip::new(samples, mel.sample_rate))
}
