//! Audio I/O and the log-mel front end.
//!
//! Conventions, fixed once so features and checkpoints never disagree:
//!
//! * periodic Hann window of `win_length`, centred inside `filter_length`;
//! * centred framing with reflect padding of `filter_length / 2` on both
//!   ends, so `n_frames = n_samples / hop_length + 1`;
//! * mel scale `2595 · log10(1 + f / 700)`, triangular filters with unit
//!   peak;
//! * magnitude (not power) spectra, compressed with the natural log after
//!   clamping at `compression_floor = 1e-5`.

mod melfile;
mod segment;
mod spectral;
mod wav;

use std::path::PathBuf;

use thiserror::Error;

use crate::textmap::{TextMap, TextMapError};

pub use melfile::{read_mel, read_mel_bytes, write_mel, write_mel_bytes, MEL_MAGIC};
pub use segment::sample_segment;
pub use spectral::{hz_to_mel, mel_filterbank, mel_spectrogram, mel_to_hz, n_frames, stft, Filterbank, Spectrogram};
pub use wav::{load_wav, probe_wav, save_wav, WavInfo};

/// Sample rate of every corpus file; anything else is rejected, never resampled.
pub const CORPUS_SAMPLE_RATE: u32 = 22_050;

#[derive(Debug, Error)]
pub enum DspError {
    #[error("{0}: not a RIFF/WAVE file")]
    NotWav(PathBuf),
    #[error("{path}: unsupported format ({detail}); expected 16-bit PCM mono")]
    UnsupportedFormat { path: PathBuf, detail: String },
    #[error("{0}: no audio samples")]
    EmptyAudio(PathBuf),
    #[error("sample rate {found} Hz, expected {expected} Hz")]
    WrongSampleRate { expected: u32, found: u32 },
    #[error("invalid configuration: {0}")]
    ConfigInvalid(String),
    #[error("corrupt mel feature file: {0}")]
    CorruptMelFile(String),
    #[error("I/O failure on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

/// Mono waveform with samples nominally in `[-1, 1]`.
#[derive(Clone, Debug, PartialEq)]
pub struct AudioClip {
    samples: Vec<f32>,
    sample_rate: u32,
}

impl AudioClip {
    pub fn new(samples: Vec<f32>, sample_rate: u32) -> Self {
        Self { samples, sample_rate }
    }

    pub fn samples(&self) -> &[f32] {
        &self.samples
    }

    pub fn into_samples(self) -> Vec<f32> {
        self.samples
    }

    pub fn sample_rate(&self) -> u32 {
        self.sample_rate
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    pub fn duration_secs(&self) -> f64 {
        self.samples.len() as f64 / self.sample_rate as f64
    }

    pub fn require_rate(&self, expected: u32) -> Result<(), DspError> {
        if self.sample_rate != expected {
            return Err(DspError::WrongSampleRate { expected, found: self.sample_rate });
        }
        Ok(())
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum WindowKind {
    /// `0.5 - 0.5·cos(2πn / N)` for `n` in `0..N`.
    PeriodicHann,
}

impl WindowKind {
    pub fn name(self) -> &'static str {
        match self {
            WindowKind::PeriodicHann => "hann",
        }
    }

    pub fn from_name(name: &str) -> Option<Self> {
        (name == "hann").then_some(WindowKind::PeriodicHann)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct StftConfig {
    pub filter_length: usize,
    pub hop_length: usize,
    pub win_length: usize,
    pub window: WindowKind,
}

impl Default for StftConfig {
    fn default() -> Self {
        Self { filter_length: 1024, hop_length: 256, win_length: 1024, window: WindowKind::PeriodicHann }
    }
}

impl StftConfig {
    pub fn validate(&self) -> Result<(), DspError> {
        if self.filter_length == 0 || self.hop_length == 0 || self.win_length == 0 {
            return Err(DspError::ConfigInvalid("STFT lengths must be positive".into()));
        }
        if self.win_length > self.filter_length {
            return Err(DspError::ConfigInvalid(format!(
                "win_length {} exceeds filter_length {}",
                self.win_length, self.filter_length
            )));
        }
        if self.hop_length > self.win_length {
            return Err(DspError::ConfigInvalid(format!(
                "hop_length {} exceeds win_length {}",
                self.hop_length, self.win_length
            )));
        }
        Ok(())
    }

    pub fn n_bins(&self) -> usize {
        self.filter_length / 2 + 1
    }

    pub fn to_textmap(&self) -> TextMap {
        let mut m = TextMap::new();
        m.insert("filter_length", self.filter_length);
        m.insert("hop_length", self.hop_length);
        m.insert("win_length", self.win_length);
        m.insert("window", self.window.name());
        m
    }

    /// Missing keys keep their defaults; unknown keys are rejected.
    pub fn from_textmap(m: &TextMap) -> Result<Self, TextMapError> {
        m.reject_unknown(&["filter_length", "hop_length", "win_length", "window"])?;
        let d = Self::default();
        let window = match m.get("window") {
            None => d.window,
            Some(name) => WindowKind::from_name(name)
                .ok_or_else(|| TextMapError::Invalid { key: "window".into(), value: name.into() })?,
        };
        Ok(Self {
            filter_length: m.parse_opt("filter_length")?.unwrap_or(d.filter_length),
            hop_length: m.parse_opt("hop_length")?.unwrap_or(d.hop_length),
            win_length: m.parse_opt("win_length")?.unwrap_or(d.win_length),
            window,
        })
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct MelConfig {
    pub n_mels: usize,
    pub fmin: f64,
    pub fmax: f64,
    pub compression_floor: f64,
}

impl Default for MelConfig {
    fn default() -> Self {
        Self { n_mels: 80, fmin: 0.0, fmax: 8000.0, compression_floor: 1e-5 }
    }
}

impl MelConfig {
    pub fn validate(&self, sample_rate: u32) -> Result<(), DspError> {
        if self.n_mels == 0 {
            return Err(DspError::ConfigInvalid("n_mels must be positive".into()));
        }
        let nyquist = sample_rate as f64 / 2.0;
        if !(0.0 <= self.fmin && self.fmin < self.fmax && self.fmax <= nyquist) {
            return Err(DspError::ConfigInvalid(format!(
                "need 0 <= fmin < fmax <= {nyquist}, got fmin {} fmax {}",
                self.fmin, self.fmax
            )));
        }
        if !(self.compression_floor > 0.0 && self.compression_floor.is_finite()) {
            return Err(DspError::ConfigInvalid("compression_floor must be a positive real".into()));
        }
        Ok(())
    }

    pub fn to_textmap(&self) -> TextMap {
        let mut m = TextMap::new();
        m.insert("n_mels", self.n_mels);
        m.insert("fmin", self.fmin);
        m.insert("fmax", self.fmax);
        m.insert("compression_floor", self.compression_floor);
        m.insert("log", "natural");
        m.insert("spectrum", "magnitude");
        m
    }

    /// Missing keys keep their defaults. `log` and `spectrum` record the
    /// compression convention and only `natural` / `magnitude` are accepted.
    pub fn from_textmap(m: &TextMap) -> Result<Self, TextMapError> {
        m.reject_unknown(&["n_mels", "fmin", "fmax", "compression_floor", "log", "spectrum"])?;
        for (key, only) in [("log", "natural"), ("spectrum", "magnitude")] {
            if let Some(v) = m.get(key) {
                if v != only {
                    return Err(TextMapError::Invalid { key: key.into(), value: v.into() });
                }
            }
        }
        let d = Self::default();
        Ok(Self {
            n_mels: m.parse_opt("n_mels")?.unwrap_or(d.n_mels),
            fmin: m.parse_opt("fmin")?.unwrap_or(d.fmin),
            fmax: m.parse_opt("fmax")?.unwrap_or(d.fmax),
            compression_floor: m.parse_opt("compression_floor")?.unwrap_or(d.compression_floor),
        })
    }
}

/// Log-compressed mel energies, `n_mels × n_frames`, row-major.
#[derive(Clone, Debug, PartialEq)]
pub struct MelSpectrogram {
    pub n_mels: usize,
    pub n_frames: usize,
    pub values: Vec<f32>,
    pub hop_length: usize,
    pub sample_rate: u32,
    /// Length of the clip the features came from, when known. Feature files
    /// do not store it.
    pub n_samples: Option<usize>,
}

impl MelSpectrogram {
    pub fn at(&self, mel: usize, frame: usize) -> f32 {
        self.values[mel * self.n_frames + frame]
    }

    /// Waveform length a vocoder should produce for these features: the
    /// source length when known, otherwise every frame's full hop.
    pub fn covered_samples(&self) -> usize {
        self.n_samples.unwrap_or(self.n_frames * self.hop_length)
    }
}
