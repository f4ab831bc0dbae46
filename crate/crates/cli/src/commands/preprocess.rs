use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use kwglow::corpus::{audit_audio, load_manifest, AuditMode, CorpusError, Normalizer, Split};
use kwglow::dsp::{load_wav, mel_spectrogram, write_mel};
use kwglow::training::RunConfig;

use super::write_file;
use crate::fail::{runtime, CmdResult, Failure};

/// Feature files are named after utterance ids, so ids must be plain file names.
fn file_stem_ok(id: &str) -> bool {
    !id.contains(['/', '\\']) && id != "." && id != ".."
}

pub fn preprocess(manifest_path: &Path, out_dir: &Path, normalizer: &str, json: Option<&Path>) -> CmdResult {
    let normalizer: Normalizer = normalizer.parse().map_err(|e: CorpusError| Failure::Usage(e.to_string()))?;
    let manifest = load_manifest(manifest_path, normalizer)?;
    if let Some(r) = manifest.split(Split::Train).find(|r| !file_stem_ok(&r.id)) {
        return Err(Failure::Data(format!("utterance id `{}` cannot name a feature file", r.id)));
    }

    let report = audit_audio(&manifest, AuditMode::Full);
    fs::create_dir_all(out_dir).map_err(|e| runtime(format!("cannot create {}: {e}", out_dir.display())))?;
    write_file(&out_dir.join("audit.tsv"), report.to_text())?;
    print!("{}", report.to_text());
    if let Some(path) = json {
        write_file(path, report.to_json())?;
    }
    if !report.is_clean() {
        return Err(Failure::Data(format!(
            "audit found {} missing and {} unreadable audio files",
            report.missing.len(),
            report.wrong_format.len()
        )));
    }

    let config = RunConfig::default();
    let mut texts = String::new();
    let mut written = 0;
    for record in manifest.split(Split::Train) {
        let clip = load_wav(manifest.resolve(record))?;
        let mel = mel_spectrogram(&clip, &config.stft, &config.mel)?;
        let path = out_dir.join(format!("{}.kmel", record.id));
        write_mel(&mel, &path).map_err(runtime)?;
        let _ = writeln!(texts, "{}\t{}", record.id, record.text);
        written += 1;
    }
    write_file(&out_dir.join("texts.tsv"), texts)?;
    println!("wrote {written} feature files to {}", out_dir.display());
    Ok(())
}
