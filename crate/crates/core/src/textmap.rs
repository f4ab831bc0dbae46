//! The `key = value` text format used for checkpoint headers and config
//! files. Keys are sorted on output so identical maps always serialise to
//! identical bytes.

use std::collections::BTreeMap;
use std::fmt::Display;
use std::str::FromStr;

use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum TextMapError {
    #[error("line {line}: {message}")]
    Syntax { line: usize, message: String },
    #[error("missing key `{0}`")]
    Missing(String),
    #[error("key `{key}`: cannot parse `{value}`")]
    Invalid { key: String, value: String },
    #[error("unknown key `{0}`")]
    Unknown(String),
}

#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct TextMap {
    entries: BTreeMap<String, String>,
}

fn valid_key(key: &str) -> bool {
    !key.is_empty() && key.bytes().all(|b| b.is_ascii_alphanumeric() || b == b'_' || b == b'.')
}

impl TextMap {
    pub fn new() -> Self {
        Self::default()
    }

    /// # Panics
    ///
    /// On keys outside `[A-Za-z0-9_.]` or values containing a newline.
    pub fn insert(&mut self, key: impl Into<String>, value: impl Display) {
        let key = key.into();
        let value = value.to_string();
        assert!(valid_key(&key), "invalid key {key:?}");
        assert!(!value.contains('\n'), "value for {key} contains a newline");
        self.entries.insert(key, value);
    }

    pub fn get(&self, key: &str) -> Option<&str> {
        self.entries.get(key).map(String::as_str)
    }

    pub fn contains(&self, key: &str) -> bool {
        self.entries.contains_key(key)
    }

    pub fn keys(&self) -> impl Iterator<Item = &str> {
        self.entries.keys().map(String::as_str)
    }

    pub fn iter(&self) -> impl Iterator<Item = (&str, &str)> {
        self.entries.iter().map(|(k, v)| (k.as_str(), v.as_str()))
    }

    pub fn require(&self, key: &str) -> Result<&str, TextMapError> {
        self.get(key).ok_or_else(|| TextMapError::Missing(key.to_string()))
    }

    pub fn parse<T: FromStr>(&self, key: &str) -> Result<T, TextMapError> {
        let raw = self.require(key)?;
        raw.parse().map_err(|_| TextMapError::Invalid { key: key.into(), value: raw.into() })
    }

    /// Like [`parse`](Self::parse) but `None` when the key is absent.
    pub fn parse_opt<T: FromStr>(&self, key: &str) -> Result<Option<T>, TextMapError> {
        if self.contains(key) { self.parse(key).map(Some) } else { Ok(None) }
    }

    /// Entries whose key starts with `prefix`, with the prefix removed.
    pub fn section(&self, prefix: &str) -> TextMap {
        let entries = self
            .entries
            .iter()
            .filter_map(|(k, v)| k.strip_prefix(prefix).map(|rest| (rest.to_string(), v.clone())))
            .collect();
        TextMap { entries }
    }

    /// Merges `other` under `prefix`.
    pub fn extend_prefixed(&mut self, prefix: &str, other: &TextMap) {
        for (k, v) in &other.entries {
            self.entries.insert(format!("{prefix}{k}"), v.clone());
        }
    }

    pub fn to_text(&self) -> String {
        let mut out = String::new();
        for (k, v) in &self.entries {
            out.push_str(k);
            out.push_str(" = ");
            out.push_str(v);
            out.push('\n');
        }
        out
    }

    /// Parses `key = value` lines. Blank lines and lines starting with `#`
    /// are skipped; duplicate keys are an error.
    pub fn from_text(text: &str) -> Result<Self, TextMapError> {
        let mut map = TextMap::new();
        for (i, line) in text.lines().enumerate() {
            let line_no = i + 1;
            let trimmed = line.trim();
            if trimmed.is_empty() || trimmed.starts_with('#') {
                continue;
            }
            let Some((k, v)) = trimmed.split_once('=') else {
                return Err(TextMapError::Syntax { line: line_no, message: "expected `key = value`".into() });
            };
            let (k, v) = (k.trim(), v.trim());
            if !valid_key(k) {
                return Err(TextMapError::Syntax { line: line_no, message: format!("invalid key `{k}`") });
            }
            if map.entries.insert(k.to_string(), v.to_string()).is_some() {
                return Err(TextMapError::Syntax { line: line_no, message: format!("duplicate key `{k}`") });
            }
        }
        Ok(map)
    }

    /// Fails on the first key not in `allowed`.
    pub fn reject_unknown(&self, allowed: &[&str]) -> Result<(), TextMapError> {
        match self.keys().find(|k| !allowed.contains(k)) {
            Some(k) => Err(TextMapError::Unknown(k.to_string())),
            None => Ok(()),
        }
    }
}
