use num_complex::Complex64;
use rustfft::FftPlanner;

use super::{AudioClip, DspError, MelConfig, MelSpectrogram, StftConfig, WindowKind};

/// One-sided complex STFT, `bins × frames`, row-major.
#[derive(Clone, Debug, PartialEq)]
pub struct Spectrogram {
    pub bins: usize,
    pub frames: usize,
    pub data: Vec<Complex64>,
}

impl Spectrogram {
    pub fn at(&self, bin: usize, frame: usize) -> Complex64 {
        self.data[bin * self.frames + frame]
    }
}

/// Frame count under centred framing.
pub fn n_frames(n_samples: usize, hop_length: usize) -> usize {
    n_samples / hop_length + 1
}

/// Mirror index into `[0, len)` without repeating the edge sample. Signals
/// shorter than the pad length reflect repeatedly.
fn reflect(i: isize, len: usize) -> usize {
    if len == 1 {
        return 0;
    }
    let period = 2 * (len as isize - 1);
    let m = i.rem_euclid(period);
    if m < len as isize { m as usize } else { (period - m) as usize }
}

pub(crate) fn window(cfg: &StftConfig) -> Vec<f64> {
    let mut w = vec![0.0; cfg.filter_length];
    let offset = (cfg.filter_length - cfg.win_length) / 2;
    match cfg.window {
        WindowKind::PeriodicHann => {
            let n = cfg.win_length as f64;
            for i in 0..cfg.win_length {
                w[offset + i] = 0.5 - 0.5 * (2.0 * std::f64::consts::PI * i as f64 / n).cos();
            }
        }
    }
    w
}

/// Windowed, reflect-padded, centred frames: frame `t` is the
/// `filter_length` samples starting at `t·hop - filter_length/2`.
pub(crate) fn frames(samples: &[f32], cfg: &StftConfig) -> Vec<Vec<f64>> {
    let win = window(cfg);
    let pad = (cfg.filter_length / 2) as isize;
    (0..n_frames(samples.len(), cfg.hop_length))
        .map(|t| {
            let start = (t * cfg.hop_length) as isize - pad;
            (0..cfg.filter_length)
                .map(|k| samples[reflect(start + k as isize, samples.len())] as f64 * win[k])
                .collect()
        })
        .collect()
}

pub fn stft(clip: &AudioClip, cfg: &StftConfig) -> Result<Spectrogram, DspError> {
    cfg.validate()?;
    if clip.is_empty() {
        return Err(DspError::ConfigInvalid("stft needs at least one sample".into()));
    }
    let frames = frames(clip.samples(), cfg);
    let bins = cfg.n_bins();
    let fft = FftPlanner::<f64>::new().plan_fft_forward(cfg.filter_length);
    let mut data = vec![Complex64::new(0.0, 0.0); bins * frames.len()];
    let mut buf = vec![Complex64::new(0.0, 0.0); cfg.filter_length];
    for (t, frame) in frames.iter().enumerate() {
        for (b, &v) in buf.iter_mut().zip(frame) {
            *b = Complex64::new(v, 0.0);
        }
        fft.process(&mut buf);
        for k in 0..bins {
            data[k * frames.len() + t] = buf[k];
        }
    }
    Ok(Spectrogram { bins, frames: frames.len(), data })
}

pub fn hz_to_mel(hz: f64) -> f64 {
    2595.0 * (1.0 + hz / 700.0).log10()
}

pub fn mel_to_hz(mel: f64) -> f64 {
    700.0 * (10f64.powf(mel / 2595.0) - 1.0)
}

/// Triangular mel filters, `n_mels × n_bins`, row-major.
#[derive(Clone, Debug, PartialEq)]
pub struct Filterbank {
    pub n_mels: usize,
    pub n_bins: usize,
    pub weights: Vec<f64>,
    /// Centre frequency of each filter in Hz.
    pub centers_hz: Vec<f64>,
}

impl Filterbank {
    pub fn row(&self, m: usize) -> &[f64] {
        &self.weights[m * self.n_bins..(m + 1) * self.n_bins]
    }
}

pub fn mel_filterbank(cfg: &MelConfig, stft_cfg: &StftConfig, sample_rate: u32) -> Result<Filterbank, DspError> {
    cfg.validate(sample_rate)?;
    stft_cfg.validate()?;
    let n_bins = stft_cfg.n_bins();
    let lo = hz_to_mel(cfg.fmin);
    let hi = hz_to_mel(cfg.fmax);
    let edges: Vec<f64> = (0..cfg.n_mels + 2)
        .map(|i| mel_to_hz(lo + (hi - lo) * i as f64 / (cfg.n_mels + 1) as f64))
        .collect();
    let bin_hz = sample_rate as f64 / stft_cfg.filter_length as f64;
    let mut weights = vec![0.0; cfg.n_mels * n_bins];
    for m in 0..cfg.n_mels {
        let (left, center, right) = (edges[m], edges[m + 1], edges[m + 2]);
        for k in 0..n_bins {
            let f = k as f64 * bin_hz;
            let rising = (f - left) / (center - left);
            let falling = (right - f) / (right - center);
            weights[m * n_bins + k] = rising.min(falling).max(0.0);
        }
    }
    Ok(Filterbank { n_mels: cfg.n_mels, n_bins, weights, centers_hz: edges[1..=cfg.n_mels].to_vec() })
}

/// `ln(max(floor, filterbank · |stft|))`.
pub fn mel_spectrogram(clip: &AudioClip, stft_cfg: &StftConfig, mel_cfg: &MelConfig) -> Result<MelSpectrogram, DspError> {
    let spec = stft(clip, stft_cfg)?;
    let fb = mel_filterbank(mel_cfg, stft_cfg, clip.sample_rate())?;
    let floor = mel_cfg.compression_floor;
    let mags: Vec<f64> = spec.data.iter().map(|c| c.norm()).collect();
    let mut values = vec![0f32; fb.n_mels * spec.frames];
    for m in 0..fb.n_mels {
        let row = fb.row(m);
        for t in 0..spec.frames {
            let e: f64 = row
                .iter()
                .enumerate()
                .filter(|(_, &w)| w != 0.0)
                .map(|(k, &w)| w * mags[k * spec.frames + t])
                .sum();
            values[m * spec.frames + t] = e.max(floor).ln() as f32;
        }
    }
    Ok(MelSpectrogram {
        n_mels: fb.n_mels,
        n_frames: spec.frames,
        values,
        hop_length: stft_cfg.hop_length,
        sample_rate: clip.sample_rate(),
        n_samples: Some(clip.len()),
    })
}
