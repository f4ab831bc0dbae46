use std::f64::consts::PI;

use kwglow::dsp::{
    load_wav, mel_filterbank, mel_spectrogram, save_wav, stft, AudioClip, MelConfig, StftConfig, CORPUS_SAMPLE_RATE,
};
use num_complex::Complex64;
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn noise(len: usize, seed: u64) -> AudioClip {
    let mut r = ChaCha8Rng::seed_from_u64(seed);
    AudioClip::new((0..len).map(|_| r.random_range(-0.5f32..0.5)).collect(), CORPUS_SAMPLE_RATE)
}

/// Pads like `numpy.pad(x, p, mode="reflect")` by building the array.
fn reflect_pad(x: &[f64], p: usize) -> Vec<f64> {
    let mut out = Vec::with_capacity(x.len() + 2 * p);
    let mut left: Vec<f64> = Vec::new();
    let mut right: Vec<f64> = Vec::new();
    // Walk outward one sample at a time, bouncing off the ends.
    let (mut i, mut step) = (0isize, 1isize);
    for _ in 0..p {
        if x.len() == 1 {
            left.push(x[0]);
            continue;
        }
        i += step;
        if i == x.len() as isize - 1 || i == 0 {
            step = -step;
        }
        left.push(x[i as usize]);
    }
    let (mut i, mut step) = (x.len() as isize - 1, -1isize);
    for _ in 0..p {
        if x.len() == 1 {
            right.push(x[0]);
            continue;
        }
        i += step;
        if i == 0 || i == x.len() as isize - 1 {
            step = -step;
        }
        right.push(x[i as usize]);
    }
    out.extend(left.iter().rev());
    out.extend_from_slice(x);
    out.extend(right);
    out
}

/// O(N²) one-sided DFT of every centred, Hann-windowed frame.
fn naive_stft(clip: &AudioClip, n_fft: usize, hop: usize) -> Vec<Vec<Complex64>> {
    let x: Vec<f64> = clip.samples().iter().map(|&v| v as f64).collect();
    let padded = reflect_pad(&x, n_fft / 2);
    let hann: Vec<f64> = (0..n_fft).map(|i| (PI * i as f64 / n_fft as f64).sin().powi(2)).collect();
    let frames = x.len() / hop + 1;
    (0..frames)
        .map(|t| {
            let seg = &padded[t * hop..t * hop + n_fft];
            (0..=n_fft / 2)
                .map(|k| {
                    seg.iter().zip(&hann).enumerate().fold(Complex64::new(0.0, 0.0), |acc, (n, (&s, &w))| {
                        let ang = -2.0 * PI * (k * n % n_fft) as f64 / n_fft as f64;
                        acc + Complex64::from_polar(s * w, ang)
                    })
                })
                .collect()
        })
        .collect()
}

/// Filters built from bracketing edges: `max(0, min(rise, fall))` written
/// as separate lower and upper slopes over mel-spaced edge frequencies.
fn direct_filterbank(n_mels: usize, n_fft: usize, sr: f64, fmin: f64, fmax: f64) -> Vec<Vec<f64>> {
    let mel = |f: f64| 2595.0 * (1.0 + f / 700.0).log10();
    let hz = |m: f64| 700.0 * (10f64.powf(m / 2595.0) - 1.0);
    let step = (mel(fmax) - mel(fmin)) / (n_mels + 1) as f64;
    let edges: Vec<f64> = (0..n_mels + 2).map(|i| hz(mel(fmin) + step * i as f64)).collect();
    let freqs: Vec<f64> = (0..=n_fft / 2).map(|k| k as f64 * sr / n_fft as f64).collect();
    (0..n_mels)
        .map(|m| {
            freqs
                .iter()
                .map(|&f| {
                    if f <= edges[m] || f >= edges[m + 2] {
                        0.0
                    } else if f <= edges[m + 1] {
                        (f - edges[m]) / (edges[m + 1] - edges[m])
                    } else {
                        (edges[m + 2] - f) / (edges[m + 2] - edges[m + 1])
                    }
                })
                .collect()
        })
        .collect()
}

#[test]
fn reflect_pad_oracle_agrees_with_numpy() {
    // numpy.pad([0,1,2,3], 3, mode="reflect")
    assert_eq!(reflect_pad(&[0.0, 1.0, 2.0, 3.0], 3), vec![3.0, 2.0, 1.0, 0.0, 1.0, 2.0, 3.0, 2.0, 1.0, 0.0]);
}

#[test]
fn stft_matches_naive_dft() {
    let cfg = StftConfig::default();
    for (len, seed) in [(3000, 1), (1024, 2), (700, 3), (5, 4)] {
        let clip = noise(len, seed);
        let fast = stft(&clip, &cfg).unwrap();
        let slow = naive_stft(&clip, 1024, 256);
        assert_eq!(fast.frames, slow.len());
        for (t, frame) in slow.iter().enumerate() {
            let scale = frame.iter().map(|c| c.norm()).fold(0.0, f64::max);
            let err = frame.iter().enumerate().map(|(k, c)| (fast.at(k, t) - c).norm()).fold(0.0, f64::max);
            assert!(err <= 1e-6 * scale, "len {len} frame {t}: {err} vs scale {scale}");
        }
    }
}

#[test]
fn cosine_at_bin_25_peaks_at_row_25() {
    let f = 25.0 * 22_050.0 / 1024.0;
    let samples = (0..16_000).map(|n| (2.0 * PI * f * n as f64 / 22_050.0).cos() as f32 * 0.5).collect();
    let spec = stft(&AudioClip::new(samples, 22_050), &StftConfig::default()).unwrap();
    assert_eq!((spec.bins, spec.frames), (513, 63));
    for t in 0..spec.frames {
        let peak = (0..spec.bins).max_by(|&a, &b| spec.at(a, t).norm().total_cmp(&spec.at(b, t).norm())).unwrap();
        assert_eq!(peak, 25, "frame {t}");
    }
}

#[test]
fn filterbank_matches_direct_construction() {
    let fb = mel_filterbank(&MelConfig::default(), &StftConfig::default(), 22_050).unwrap();
    let direct = direct_filterbank(80, 1024, 22_050.0, 0.0, 8000.0);
    for m in 0..80 {
        for k in 0..513 {
            assert!((fb.row(m)[k] - direct[m][k]).abs() < 1e-12, "filter {m} bin {k}");
        }
        assert!(fb.row(m).iter().any(|&w| w > 0.0), "filter {m} is empty");
    }
    assert!(fb.centers_hz.windows(2).all(|w| w[0] <= w[1]));
    // Bin k sits at k·22050/1024 Hz; everything above 8 kHz is dead.
    let first_above = (0..513).find(|&k| k as f64 * 22_050.0 / 1024.0 > 8000.0).unwrap();
    for m in 0..80 {
        assert!(fb.row(m)[first_above..].iter().all(|&w| w == 0.0));
    }
    // Each peak sits between its neighbours' peaks.
    let peaks: Vec<usize> = (0..80)
        .map(|m| (0..513).max_by(|&a, &b| fb.row(m)[a].total_cmp(&fb.row(m)[b])).unwrap())
        .collect();
    assert!(peaks.windows(2).all(|w| w[0] <= w[1]));
}

#[test]
fn mel_matches_composed_oracles() {
    let clip = noise(2048, 9);
    let mel = mel_spectrogram(&clip, &StftConfig::default(), &MelConfig::default()).unwrap();
    let spec = naive_stft(&clip, 1024, 256);
    let fb = direct_filterbank(80, 1024, 22_050.0, 0.0, 8000.0);
    assert_eq!((mel.n_mels, mel.n_frames), (80, spec.len()));
    for m in 0..80 {
        for (t, frame) in spec.iter().enumerate() {
            let e: f64 = fb[m].iter().zip(frame).map(|(w, c)| w * c.norm()).sum();
            let expected = e.max(1e-5).ln();
            let got = mel.at(m, t) as f64;
            assert!((got - expected).abs() <= 1e-5 * expected.abs().max(1.0), "mel {m} frame {t}: {got} vs {expected}");
        }
    }
}

#[test]
fn canonical_segment_shape() {
    let mel = mel_spectrogram(&noise(16_000, 10), &StftConfig::default(), &MelConfig::default()).unwrap();
    assert_eq!((mel.n_mels, mel.n_frames), (80, 63));
    let floor = (1e-5f64).ln() as f32;
    assert!(mel.values.iter().all(|&v| v >= floor));
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn mel_is_monotone_under_amplitude_scaling(seed in any::<u64>(), len in 1usize..3000, c in 1.01f32..4.0) {
        let clip = noise(len, seed);
        let scaled = AudioClip::new(clip.samples().iter().map(|v| v * c).collect(), clip.sample_rate());
        let a = mel_spectrogram(&clip, &StftConfig::default(), &MelConfig::default()).unwrap();
        let b = mel_spectrogram(&scaled, &StftConfig::default(), &MelConfig::default()).unwrap();
        for (x, y) in a.values.iter().zip(&b.values) {
            prop_assert!(y >= x);
        }
    }

    #[test]
    fn wav_round_trip_within_one_step(samples in prop::collection::vec(-1.0f32..=1.0, 1..2000)) {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("x.wav");
        save_wav(&AudioClip::new(samples.clone(), 22_050), &path).unwrap();
        let back = load_wav(&path).unwrap();
        prop_assert_eq!(back.len(), samples.len());
        for (a, b) in samples.iter().zip(back.samples()) {
            prop_assert!((a - b).abs() <= 1.0 / 32768.0);
        }
    }
}
