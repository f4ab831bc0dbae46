use crate::dsp::MelSpectrogram;
use crate::numerics::{Real, Tensor};

use super::FlowError;

/// Groups consecutive samples into channels: `out[c, t] = samples[t·G + c]`.
pub fn squeeze<T: Real>(samples: &[T], group_size: usize) -> Result<Tensor<T>, FlowError> {
    if group_size == 0 || !samples.len().is_multiple_of(group_size) {
        return Err(FlowError::NotDivisible { len: samples.len(), group_size });
    }
    let frames = samples.len() / group_size;
    let mut out = Tensor::zeros(&[group_size, frames]);
    let data = out.data_mut();
    for (t, block) in samples.chunks_exact(group_size).enumerate() {
        for (c, &v) in block.iter().enumerate() {
            data[c * frames + t] = v;
        }
    }
    Ok(out)
}

/// Inverse of [`squeeze`].
pub fn unsqueeze<T: Real>(t: &Tensor<T>) -> Vec<T> {
    let (groups, frames) = t.dims2();
    let mut out = vec![T::zero(); groups * frames];
    for c in 0..groups {
        for (f, &v) in t.row(c).iter().enumerate() {
            out[f * groups + c] = v;
        }
    }
    out
}

/// Stretches mel frames onto `target_frames` squeezed frames by repetition.
/// Squeezed frame `t` (samples `t·G .. t·G + G`) reads mel frame
/// `⌊t·G / hop⌋`.
pub fn upsample_condition<T: Real>(
    mel: &MelSpectrogram,
    target_frames: usize,
    group_size: usize,
) -> Result<Tensor<T>, FlowError> {
    if group_size == 0 {
        return Err(FlowError::Config("group_size must be positive".into()));
    }
    if target_frames > 0 {
        let last = (target_frames - 1) * group_size / mel.hop_length;
        if last >= mel.n_frames {
            return Err(FlowError::MelTooShort { needed: last + 1, available: mel.n_frames });
        }
    }
    let mut out = Tensor::zeros(&[mel.n_mels, target_frames]);
    for m in 0..mel.n_mels {
        let row = out.row_mut(m);
        for (t, v) in row.iter_mut().enumerate() {
            *v = T::lit(mel.at(m, t * group_size / mel.hop_length) as f64);
        }
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn mel(n_frames: usize, f: impl Fn(usize, usize) -> f32) -> MelSpectrogram {
        let n_mels = 3;
        let values = (0..n_mels * n_frames).map(|i| f(i / n_frames, i % n_frames)).collect();
        MelSpectrogram { n_mels, n_frames, values, hop_length: 256, sample_rate: 22_050, n_samples: None }
    }

    #[test]
    fn squeeze_layout() {
        let s: Vec<f32> = (1..=16).map(|v| v as f32).collect();
        let t = squeeze(&s, 8).unwrap();
        assert_eq!(t.shape(), &[8, 2]);
        let frame0: Vec<f32> = (0..8).map(|c| t.at2(c, 0)).collect();
        let frame1: Vec<f32> = (0..8).map(|c| t.at2(c, 1)).collect();
        assert_eq!(frame0, (1..=8).map(|v| v as f32).collect::<Vec<_>>());
        assert_eq!(frame1, (9..=16).map(|v| v as f32).collect::<Vec<_>>());
        assert_eq!(unsqueeze(&t), s);
        assert_eq!(squeeze(&vec![0f32; 16000], 8).unwrap().shape(), &[8, 2000]);
        assert!(matches!(squeeze(&[0f32; 10], 8), Err(FlowError::NotDivisible { .. })));
    }

    #[test]
    fn unsqueeze_single_frame() {
        let t = Tensor::from_vec(&[2, 1], vec![3.0f64, 4.0]).unwrap();
        assert_eq!(unsqueeze(&t), vec![3.0, 4.0]);
    }

    #[test]
    fn each_frame_repeats_hop_over_group_times() {
        let m = mel(63, |_, f| f as f32);
        let c: Tensor<f32> = upsample_condition(&m, 2000, 8).unwrap();
        for t in 0..2000 {
            assert_eq!(c.at2(0, t), (t / 32) as f32);
        }
        let flat = mel(63, |r, _| r as f32 * 0.5);
        let c: Tensor<f64> = upsample_condition(&flat, 2000, 8).unwrap();
        for r in 0..3 {
            assert!(c.row(r).iter().all(|&v| v == r as f64 * 0.5));
        }
    }

    #[test]
    fn width_is_exact_for_every_segment_length() {
        for len in (8..=16000).step_by(8) {
            let m = mel(len / 256 + 1, |_, _| 0.0);
            let c: Tensor<f32> = upsample_condition(&m, len / 8, 8).unwrap();
            assert_eq!(c.shape(), &[3, len / 8]);
        }
    }

    #[test]
    fn too_short_mel_rejected() {
        let m = mel(2, |_, _| 0.0);
        assert!(matches!(upsample_condition::<f32>(&m, 100, 8), Err(FlowError::MelTooShort { .. })));
    }
}
