use std::path::Path;

use kwglow::dsp::{load_wav, mel_spectrogram, read_mel, save_wav, CORPUS_SAMPLE_RATE};
use kwglow::flow::infer;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::load_checkpoint;
use crate::fail::{runtime, CmdResult, Failure};

pub fn synthesize(
    checkpoint: &Path,
    mel_path: Option<&Path>,
    wav_path: Option<&Path>,
    out: &Path,
    sigma: f64,
    seed: u64,
) -> CmdResult {
    if !(sigma > 0.0 && sigma.is_finite()) {
        return Err(Failure::Usage(format!("--sigma must be positive and finite, got {sigma}")));
    }
    let ck = load_checkpoint(checkpoint)?;
    let mel = match (mel_path, wav_path) {
        (Some(path), _) => read_mel(path)?,
        (None, Some(path)) => {
            let clip = load_wav(path)?;
            clip.require_rate(CORPUS_SAMPLE_RATE)?;
            mel_spectrogram(&clip, &ck.config.stft, &ck.config.mel)?
        }
        (None, None) => return Err(Failure::Usage("one of --mel or --wav is required".into())),
    };
    if mel.hop_length != ck.config.stft.hop_length {
        return Err(Failure::Data(format!(
            "features use hop {}, the model was trained with hop {}",
            mel.hop_length, ck.config.stft.hop_length
        )));
    }
    let audio = infer(&mel, &ck.model, sigma, &mut ChaCha8Rng::seed_from_u64(seed))?;
    save_wav(&audio, out).map_err(runtime)?;
    println!("wrote {} samples ({:.3} s) to {}", audio.len(), audio.duration_secs(), out.display());
    Ok(())
}
