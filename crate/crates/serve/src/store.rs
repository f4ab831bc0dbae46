use std::collections::HashMap;
use std::fs;
use std::path::{Path, PathBuf};

use kwglow::dsp::probe_wav;

use crate::ServeError;

/// One entry of `samples.tsv`.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct StoredSample {
    pub sample_id: String,
    pub category: String,
    pub model_id: String,
    pub audio_path: PathBuf,
}

/// The samples a listening test draws from.
///
/// `samples.tsv` has one `sample_id<TAB>category<TAB>model_id<TAB>audio_path`
/// line per sample; blank lines and `#` comments are skipped and relative
/// paths resolve against the file's directory. Every audio file must be a
/// readable WAV when the store loads.
#[derive(Clone, Debug)]
pub struct SampleStore {
    samples: Vec<StoredSample>,
    by_id: HashMap<String, usize>,
}

impl SampleStore {
    pub fn load(path: impl AsRef<Path>) -> Result<Self, ServeError> {
        let path = path.as_ref();
        let text = fs::read_to_string(path).map_err(|source| ServeError::Io { path: path.to_path_buf(), source })?;
        let dir = path.parent().unwrap_or(Path::new("."));
        let mut samples = Vec::new();
        let mut lines = Vec::new();
        for (i, raw) in text.lines().enumerate() {
            let line = i + 1;
            if raw.trim().is_empty() || raw.starts_with('#') {
                continue;
            }
            let err = |message: String| ServeError::Store { path: path.to_path_buf(), line, message };
            let fields: Vec<&str> = raw.split('\t').collect();
            let [sample_id, category, model_id, audio] = fields[..] else {
                return Err(err(format!("expected 4 tab-separated fields, found {}", fields.len())));
            };
            if [sample_id, category, model_id, audio].iter().any(|f| f.is_empty()) {
                return Err(err("empty field".into()));
            }
            if !valid_id(sample_id) {
                return Err(err(format!("sample id `{sample_id}` must match [A-Za-z0-9_.-]+")));
            }
            let audio_path = dir.join(audio);
            probe_wav(&audio_path).map_err(|e| err(e.to_string()))?;
            samples.push(StoredSample {
                sample_id: sample_id.into(),
                category: category.into(),
                model_id: model_id.into(),
                audio_path,
            });
            lines.push(line);
        }
        Self::new(samples)
            .map_err(|(index, message)| ServeError::Store { path: path.to_path_buf(), line: lines[index], message })
    }

    /// Fails with the position and message of the first repeated id.
    pub fn new(samples: Vec<StoredSample>) -> Result<Self, (usize, String)> {
        let mut by_id = HashMap::new();
        for (i, s) in samples.iter().enumerate() {
            if by_id.insert(s.sample_id.clone(), i).is_some() {
                return Err((i, format!("duplicate sample id `{}`", s.sample_id)));
            }
        }
        Ok(Self { samples, by_id })
    }

    pub fn samples(&self) -> &[StoredSample] {
        &self.samples
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    pub fn get(&self, sample_id: &str) -> Option<&StoredSample> {
        self.by_id.get(sample_id).map(|&i| &self.samples[i])
    }
}

/// Session and sample ids travel in URLs and CSV cells.
pub fn valid_id(id: &str) -> bool {
    !id.is_empty() && id.len() <= 128 && id.bytes().all(|b| b.is_ascii_alphanumeric() || b"_.-".contains(&b))
}
