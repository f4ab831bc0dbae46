//! Utterance manifests.
//!
//! A manifest is UTF-8 text with one record per line:
//! `id<TAB>split<TAB>category<TAB>audio_path<TAB>text`. The text column is
//! last and may itself contain tabs. Blank lines and lines starting with `#`
//! are ignored. Relative audio paths resolve against the manifest's
//! directory.
//!
//! Test-split records may leave `audio_path` empty: the held-out sentences
//! only exist as text until something synthesises them.

mod audit;
mod normalize;

use std::collections::{BTreeMap, HashMap};
use std::fmt;
use std::fs;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use thiserror::Error;

pub use audit::{audit_audio, AuditFailure, AuditMode, AuditReport};
pub use normalize::{normalize_text, Normalizer};

#[derive(Debug, Error)]
pub enum CorpusError {
    #[error("line {line}: {message}")]
    Parse { line: usize, message: String },
    #[error("line {line}: id `{id}` already used on line {first_line}")]
    DuplicateId { id: String, line: usize, first_line: usize },
    #[error("test record `{test_id}` (line {test_line}) repeats the text of train record `{train_id}` (line {train_line})")]
    SplitLeak { train_id: String, train_line: usize, test_id: String, test_line: usize },
    #[error("unknown text normaliser `{0}`")]
    UnknownNormalizer(String),
    #[error("I/O failure on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Split {
    Train,
    Test,
}

impl fmt::Display for Split {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Split::Train => "train",
            Split::Test => "test",
        })
    }
}

impl FromStr for Split {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        match s {
            "train" => Ok(Split::Train),
            "test" => Ok(Split::Test),
            other => Err(format!("split must be `train` or `test`, got `{other}`")),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct UtteranceRecord {
    pub id: String,
    pub split: Split,
    pub category: String,
    /// Empty only for test records without audio.
    pub audio_path: String,
    pub text: String,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Manifest {
    records: Vec<UtteranceRecord>,
    /// 1-based source line of each record.
    lines: Vec<usize>,
    source_path: Option<PathBuf>,
}

impl Manifest {
    /// Validates records as if they were lines 1, 2, ... of a file.
    pub fn new(records: Vec<UtteranceRecord>, normalizer: Normalizer) -> Result<Self, CorpusError> {
        let lines = (1..=records.len()).collect();
        let m = Self { records, lines, source_path: None };
        m.validate(normalizer)?;
        Ok(m)
    }

    pub fn records(&self) -> &[UtteranceRecord] {
        &self.records
    }

    pub fn line_of(&self, index: usize) -> usize {
        self.lines[index]
    }

    pub fn source_path(&self) -> Option<&Path> {
        self.source_path.as_deref()
    }

    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    pub fn split(&self, split: Split) -> impl Iterator<Item = &UtteranceRecord> {
        self.records.iter().filter(move |r| r.split == split)
    }

    /// Where `record.audio_path` points, relative paths taken from the
    /// manifest's directory.
    pub fn resolve(&self, record: &UtteranceRecord) -> PathBuf {
        let p = Path::new(&record.audio_path);
        match self.source_path.as_deref().and_then(Path::parent) {
            Some(dir) if p.is_relative() => dir.join(p),
            _ => p.to_path_buf(),
        }
    }

    pub fn parse(text: &str, normalizer: Normalizer) -> Result<Self, CorpusError> {
        let mut records = Vec::new();
        let mut lines = Vec::new();
        for (i, raw) in text.lines().enumerate() {
            let line = i + 1;
            if raw.trim().is_empty() || raw.starts_with('#') {
                continue;
            }
            records.push(parse_record(raw, line)?);
            lines.push(line);
        }
        let m = Self { records, lines, source_path: None };
        m.validate(normalizer)?;
        Ok(m)
    }

    pub fn to_text(&self) -> String {
        self.records
            .iter()
            .map(|r| format!("{}\t{}\t{}\t{}\t{}\n", r.id, r.split, r.category, r.audio_path, r.text))
            .collect()
    }

    fn validate(&self, normalizer: Normalizer) -> Result<(), CorpusError> {
        let mut seen: HashMap<&str, usize> = HashMap::new();
        for (r, &line) in self.records.iter().zip(&self.lines) {
            check_fields(r, line)?;
            if let Some(&first_line) = seen.get(r.id.as_str()) {
                return Err(CorpusError::DuplicateId { id: r.id.clone(), line, first_line });
            }
            seen.insert(&r.id, line);
        }
        let mut train_texts: HashMap<String, (usize, usize)> = HashMap::new();
        for (i, r) in self.records.iter().enumerate() {
            if r.split == Split::Train {
                train_texts.entry(normalizer.apply(&r.text)).or_insert((i, self.lines[i]));
            }
        }
        for (i, r) in self.records.iter().enumerate() {
            if r.split != Split::Test {
                continue;
            }
            if let Some(&(j, train_line)) = train_texts.get(&normalizer.apply(&r.text)) {
                return Err(CorpusError::SplitLeak {
                    train_id: self.records[j].id.clone(),
                    train_line,
                    test_id: r.id.clone(),
                    test_line: self.lines[i],
                });
            }
        }
        Ok(())
    }
}

fn parse_record(raw: &str, line: usize) -> Result<UtteranceRecord, CorpusError> {
    let err = |message: String| CorpusError::Parse { line, message };
    let fields: Vec<&str> = raw.splitn(5, '\t').collect();
    let [id, split, category, audio_path, text] = fields[..] else {
        return Err(err(format!("expected 5 tab-separated fields, found {}", fields.len())));
    };
    Ok(UtteranceRecord {
        id: id.to_string(),
        split: split.parse().map_err(err)?,
        category: category.to_string(),
        audio_path: audio_path.to_string(),
        text: text.to_string(),
    })
}

fn check_fields(r: &UtteranceRecord, line: usize) -> Result<(), CorpusError> {
    let err = |message: String| Err(CorpusError::Parse { line, message });
    if r.id.is_empty() || r.id.starts_with('#') {
        return err(format!("id `{}` is empty or starts with `#`", r.id));
    }
    if r.category.is_empty() {
        return err(format!("record `{}` has an empty category", r.id));
    }
    if r.audio_path.is_empty() && r.split == Split::Train {
        return err(format!("train record `{}` has no audio path", r.id));
    }
    for (name, value) in [("id", &r.id), ("category", &r.category), ("audio_path", &r.audio_path)] {
        if value.contains(['\t', '\n', '\r']) {
            return err(format!("record `{}`: {name} contains a tab or line break", r.id));
        }
    }
    if r.text.contains(['\n', '\r']) {
        return err(format!("record `{}`: text contains a line break", r.id));
    }
    Ok(())
}

/// Reads and validates a manifest. Duplicate texts across splits are
/// compared after `normalizer`.
pub fn load_manifest(path: impl AsRef<Path>, normalizer: Normalizer) -> Result<Manifest, CorpusError> {
    let path = path.as_ref();
    let text = fs::read_to_string(path).map_err(|source| CorpusError::Io { path: path.to_path_buf(), source })?;
    let mut m = Manifest::parse(&text, normalizer)?;
    m.source_path = Some(path.to_path_buf());
    Ok(m)
}

pub fn write_manifest(manifest: &Manifest, path: impl AsRef<Path>) -> Result<(), CorpusError> {
    let path = path.as_ref();
    fs::write(path, manifest.to_text()).map_err(|source| CorpusError::Io { path: path.to_path_buf(), source })
}

/// Record count per category within one split.
pub fn category_stats(manifest: &Manifest, split: Split) -> BTreeMap<String, usize> {
    let mut counts = BTreeMap::new();
    for r in manifest.split(split) {
        *counts.entry(r.category.clone()).or_insert(0) += 1;
    }
    counts
}

#[cfg(test)]
mod tests {
    use super::*;

    fn rec(id: &str, split: Split, text: &str) -> UtteranceRecord {
        UtteranceRecord {
            id: id.into(),
            split,
            category: "news".into(),
            audio_path: format!("{id}.wav"),
            text: text.into(),
        }
    }

    #[test]
    fn empty_file_is_an_empty_manifest() {
        let m = Manifest::parse("", Normalizer::Identity).unwrap();
        assert!(m.is_empty());
        assert!(category_stats(&m, Split::Train).is_empty());
    }

    #[test]
    fn parse_errors_carry_line_numbers() {
        let text = "# header\na\ttrain\tnews\ta.wav\tone\nb\ttrain\tnews\n";
        match Manifest::parse(text, Normalizer::Identity) {
            Err(CorpusError::Parse { line: 3, .. }) => {}
            other => panic!("{other:?}"),
        }
        let text = "a\tdev\tnews\ta.wav\tone\n";
        assert!(matches!(Manifest::parse(text, Normalizer::Identity), Err(CorpusError::Parse { line: 1, .. })));
    }

    #[test]
    fn text_may_contain_tabs() {
        let m = Manifest::parse("a\ttrain\tnews\ta.wav\tone\ttwo\n", Normalizer::Identity).unwrap();
        assert_eq!(m.records()[0].text, "one\ttwo");
    }

    #[test]
    fn duplicate_ids_are_rejected() {
        let text = "a\ttrain\tnews\ta.wav\tone\n\na\ttest\tnews\t\ttwo\n";
        match Manifest::parse(text, Normalizer::Identity) {
            Err(CorpusError::DuplicateId { id, line: 3, first_line: 1 }) => assert_eq!(id, "a"),
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn leak_detection_uses_the_normaliser() {
        let records = vec![rec("a", Split::Train, "one  two"), rec("b", Split::Test, " one two")];
        assert!(Manifest::new(records.clone(), Normalizer::Identity).is_ok());
        assert!(matches!(Manifest::new(records, Normalizer::NfcTrim), Err(CorpusError::SplitLeak { .. })));
    }

    #[test]
    fn empty_audio_path_only_for_test_records() {
        let mut r = rec("a", Split::Test, "x");
        r.audio_path.clear();
        assert!(Manifest::new(vec![r.clone()], Normalizer::Identity).is_ok());
        r.split = Split::Train;
        assert!(Manifest::new(vec![r], Normalizer::Identity).is_err());
    }
}
