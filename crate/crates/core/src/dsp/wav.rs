use std::fs::File;
use std::io::Read;
use std::path::Path;

use super::{AudioClip, DspError};

const FULL_SCALE: f32 = 32768.0;

/// Header facts read without decoding the sample data.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct WavInfo {
    pub sample_rate: u32,
    pub channels: u16,
    pub bits_per_sample: u16,
    pub is_pcm: bool,
    pub n_samples: u64,
}

impl WavInfo {
    pub fn is_pcm16_mono(&self) -> bool {
        self.is_pcm && self.channels == 1 && self.bits_per_sample == 16
    }

    pub fn duration_secs(&self) -> f64 {
        self.n_samples as f64 / self.sample_rate as f64
    }
}

fn io_err(path: &Path, source: std::io::Error) -> DspError {
    DspError::Io { path: path.to_path_buf(), source }
}

fn check_magic(path: &Path) -> Result<(), DspError> {
    let mut head = [0u8; 12];
    let mut file = File::open(path).map_err(|e| io_err(path, e))?;
    let mut read = 0;
    while read < head.len() {
        match file.read(&mut head[read..]).map_err(|e| io_err(path, e))? {
            0 => break,
            n => read += n,
        }
    }
    if read < 12 || &head[..4] != b"RIFF" || &head[8..12] != b"WAVE" {
        return Err(DspError::NotWav(path.to_path_buf()));
    }
    Ok(())
}

fn open(path: &Path) -> Result<hound::WavReader<std::io::BufReader<File>>, DspError> {
    check_magic(path)?;
    hound::WavReader::open(path).map_err(|e| match e {
        hound::Error::IoError(source) => io_err(path, source),
        other => DspError::UnsupportedFormat { path: path.to_path_buf(), detail: other.to_string() },
    })
}

/// Reads only the header.
pub fn probe_wav(path: impl AsRef<Path>) -> Result<WavInfo, DspError> {
    let path = path.as_ref();
    let reader = open(path)?;
    let spec = reader.spec();
    Ok(WavInfo {
        sample_rate: spec.sample_rate,
        channels: spec.channels,
        bits_per_sample: spec.bits_per_sample,
        is_pcm: spec.sample_format == hound::SampleFormat::Int,
        n_samples: reader.duration() as u64,
    })
}

/// Decodes a 16-bit PCM mono WAV into `[-1, 1)` by dividing by 32768.
pub fn load_wav(path: impl AsRef<Path>) -> Result<AudioClip, DspError> {
    let path = path.as_ref();
    let mut reader = open(path)?;
    let spec = reader.spec();
    if spec.channels != 1 || spec.bits_per_sample != 16 || spec.sample_format != hound::SampleFormat::Int {
        return Err(DspError::UnsupportedFormat {
            path: path.to_path_buf(),
            detail: format!(
                "{} channel(s), {}-bit {:?}",
                spec.channels, spec.bits_per_sample, spec.sample_format
            ),
        });
    }
    let samples = reader
        .samples::<i16>()
        .map(|s| s.map(|v| v as f32 / FULL_SCALE))
        .collect::<Result<Vec<_>, _>>()
        .map_err(|e| match e {
            hound::Error::IoError(source) => io_err(path, source),
            other => DspError::UnsupportedFormat { path: path.to_path_buf(), detail: other.to_string() },
        })?;
    if samples.is_empty() {
        return Err(DspError::EmptyAudio(path.to_path_buf()));
    }
    Ok(AudioClip::new(samples, spec.sample_rate))
}

/// Writes 16-bit PCM mono. Samples are clamped to `[-1, 1 - 1/32768]` and
/// rounded to the nearest quantisation step.
pub fn save_wav(clip: &AudioClip, path: impl AsRef<Path>) -> Result<(), DspError> {
    let path = path.as_ref();
    if clip.is_empty() {
        return Err(DspError::EmptyAudio(path.to_path_buf()));
    }
    let spec = hound::WavSpec {
        channels: 1,
        sample_rate: clip.sample_rate(),
        bits_per_sample: 16,
        sample_format: hound::SampleFormat::Int,
    };
    let to_io = |e: hound::Error| match e {
        hound::Error::IoError(source) => io_err(path, source),
        other => io_err(path, std::io::Error::other(other.to_string())),
    };
    let mut writer = hound::WavWriter::create(path, spec).map_err(to_io)?;
    let top = 1.0 - 1.0 / FULL_SCALE;
    for &s in clip.samples() {
        let v = if s.is_nan() { 0.0 } else { s.clamp(-1.0, top) };
        writer.write_sample((v * FULL_SCALE).round() as i16).map_err(to_io)?;
    }
    writer.finalize().map_err(to_io)
}
