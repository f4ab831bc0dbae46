//! `KMEL1` feature files: the 5-byte magic, then `n_mels`, `n_frames`,
//! `hop_length` and `sample_rate` as little-endian `u32`, then the values
//! row-major as little-endian `f32`.

use std::path::Path;

use super::{DspError, MelSpectrogram};

pub const MEL_MAGIC: &[u8; 5] = b"KMEL1";
const HEADER_LEN: usize = 5 + 4 * 4;

pub fn write_mel_bytes(mel: &MelSpectrogram) -> Vec<u8> {
    let mut out = Vec::with_capacity(HEADER_LEN + mel.values.len() * 4);
    out.extend_from_slice(MEL_MAGIC);
    for v in [mel.n_mels as u32, mel.n_frames as u32, mel.hop_length as u32, mel.sample_rate] {
        out.extend_from_slice(&v.to_le_bytes());
    }
    for v in &mel.values {
        out.extend_from_slice(&v.to_le_bytes());
    }
    out
}

pub fn read_mel_bytes(bytes: &[u8]) -> Result<MelSpectrogram, DspError> {
    if bytes.len() < HEADER_LEN || &bytes[..5] != MEL_MAGIC {
        return Err(DspError::CorruptMelFile("missing KMEL1 header".into()));
    }
    let word = |i: usize| u32::from_le_bytes(bytes[5 + 4 * i..9 + 4 * i].try_into().unwrap());
    let (n_mels, n_frames, hop_length, sample_rate) = (word(0) as usize, word(1) as usize, word(2) as usize, word(3));
    let body = &bytes[HEADER_LEN..];
    let expected = n_mels.checked_mul(n_frames).and_then(|n| n.checked_mul(4));
    if expected != Some(body.len()) {
        return Err(DspError::CorruptMelFile(format!(
            "{n_mels} x {n_frames} values declared, {} payload bytes present",
            body.len()
        )));
    }
    if hop_length == 0 || sample_rate == 0 {
        return Err(DspError::CorruptMelFile("zero hop length or sample rate".into()));
    }
    let values = body.chunks_exact(4).map(|c| f32::from_le_bytes(c.try_into().unwrap())).collect();
    Ok(MelSpectrogram { n_mels, n_frames, values, hop_length, sample_rate, n_samples: None })
}

pub fn write_mel(mel: &MelSpectrogram, path: impl AsRef<Path>) -> Result<(), DspError> {
    let path = path.as_ref();
    std::fs::write(path, write_mel_bytes(mel)).map_err(|source| DspError::Io { path: path.to_path_buf(), source })
}

pub fn read_mel(path: impl AsRef<Path>) -> Result<MelSpectrogram, DspError> {
    let path = path.as_ref();
    let bytes = std::fs::read(path).map_err(|source| DspError::Io { path: path.to_path_buf(), source })?;
    read_mel_bytes(&bytes)
}
