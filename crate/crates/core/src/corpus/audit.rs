use std::fmt::Write as _;

use rayon::prelude::*;
use serde::Serialize;

use crate::dsp::{load_wav, probe_wav, DspError, CORPUS_SAMPLE_RATE};

use super::Manifest;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum AuditMode {
    /// Decode every file.
    Full,
    /// Read headers only; durations come from the declared data length.
    HeaderOnly,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct AuditFailure {
    pub id: String,
    pub path: String,
    pub detail: String,
}

/// Result of probing every audio file of a manifest, in manifest order.
#[derive(Clone, Debug, Default, PartialEq, Serialize)]
pub struct AuditReport {
    pub audited: usize,
    pub total_duration_secs: f64,
    pub missing: Vec<AuditFailure>,
    pub wrong_format: Vec<AuditFailure>,
    /// Test records without an audio path.
    pub skipped: Vec<String>,
}

impl AuditReport {
    pub fn is_clean(&self) -> bool {
        self.missing.is_empty() && self.wrong_format.is_empty()
    }

    /// One `key value` or `kind<TAB>id<TAB>path<TAB>detail` line per fact.
    pub fn to_text(&self) -> String {
        let mut out = String::new();
        let _ = writeln!(out, "audited\t{}", self.audited);
        let _ = writeln!(out, "total_duration_secs\t{}", self.total_duration_secs);
        for (kind, list) in [("missing", &self.missing), ("wrong_format", &self.wrong_format)] {
            for f in list {
                let _ = writeln!(out, "{kind}\t{}\t{}\t{}", f.id, f.path, f.detail);
            }
        }
        for id in &self.skipped {
            let _ = writeln!(out, "skipped\t{id}");
        }
        out
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("report serialises")
    }
}

enum Outcome {
    Ok(f64),
    Missing(String),
    WrongFormat(String),
}

fn probe(path: &std::path::Path, mode: AuditMode) -> Outcome {
    let info = match probe_wav(path) {
        Ok(info) => info,
        Err(DspError::Io { source, .. }) if source.kind() == std::io::ErrorKind::NotFound => {
            return Outcome::Missing("no such file".into())
        }
        Err(e) => return Outcome::WrongFormat(e.to_string()),
    };
    if !info.is_pcm16_mono() || info.sample_rate != CORPUS_SAMPLE_RATE {
        return Outcome::WrongFormat(format!(
            "{} Hz, {} channel(s), {}-bit{}",
            info.sample_rate,
            info.channels,
            info.bits_per_sample,
            if info.is_pcm { "" } else { " float" }
        ));
    }
    match mode {
        AuditMode::HeaderOnly => Outcome::Ok(info.duration_secs()),
        AuditMode::Full => match load_wav(path) {
            Ok(clip) => Outcome::Ok(clip.duration_secs()),
            Err(e) => Outcome::WrongFormat(e.to_string()),
        },
    }
}

/// Probes every record's audio. Failures become report entries; nothing
/// here returns an error.
pub fn audit_audio(manifest: &Manifest, mode: AuditMode) -> AuditReport {
    let outcomes: Vec<Option<Outcome>> = manifest
        .records()
        .par_iter()
        .map(|r| (!r.audio_path.is_empty()).then(|| probe(&manifest.resolve(r), mode)))
        .collect();
    let mut report = AuditReport::default();
    for (r, outcome) in manifest.records().iter().zip(outcomes) {
        let failure = |detail| AuditFailure { id: r.id.clone(), path: r.audio_path.clone(), detail };
        match outcome {
            None => report.skipped.push(r.id.clone()),
            Some(Outcome::Ok(secs)) => {
                report.audited += 1;
                report.total_duration_secs += secs;
            }
            Some(Outcome::Missing(d)) => report.missing.push(failure(d)),
            Some(Outcome::WrongFormat(d)) => report.wrong_format.push(failure(d)),
        }
    }
    report
}
