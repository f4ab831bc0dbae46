#![allow(dead_code)]

use kwglow::dsp::MelSpectrogram;
use kwglow::flow::{FlowConfig, FlowModel};
use kwglow::{Real, Tensor};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn uniform<T: Real>(shape: &[usize], bound: f64, rng: &mut impl Rng) -> Tensor<T> {
    let n = shape.iter().product();
    Tensor::from_vec(shape, (0..n).map(|_| T::lit(rng.random_range(-bound..=bound))).collect()).unwrap()
}

pub fn random_mel(n_mels: usize, n_frames: usize, rng: &mut impl Rng) -> MelSpectrogram {
    MelSpectrogram {
        n_mels,
        n_frames,
        values: (0..n_mels * n_frames).map(|_| rng.random_range(-11.5f32..2.0)).collect(),
        hop_length: 256,
        sample_rate: 22_050,
        n_samples: None,
    }
}

/// Random model pushed away from the identity so every term is live.
pub fn random_model<T: Real>(config: FlowConfig, scale: f64, seed: u64) -> FlowModel<T> {
    let mut r = rng(seed);
    let mut m = FlowModel::<f64>::new(config, &mut r).unwrap();
    m.perturb(scale, &mut r);
    m.cast()
}

/// Group 4, two flows, one early output after the first: a 16-dimensional
/// map at four frames.
pub fn jacobian_config() -> FlowConfig {
    FlowConfig {
        group_size: 4,
        n_flows: 2,
        early_every: 1,
        early_size: 1,
        wn_layers: 2,
        wn_channels: 8,
        ..FlowConfig::default()
    }
}
