use std::fmt;
use std::str::FromStr;

use unicode_normalization::UnicodeNormalization;

use super::CorpusError;

/// Built-in text normalisers. Language-specific orthography tools plug in
/// upstream of the manifest, not here.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub enum Normalizer {
    #[default]
    Identity,
    /// Unicode NFC, then every whitespace run becomes one space and the
    /// ends are trimmed.
    NfcTrim,
}

impl Normalizer {
    pub const ALL: [Normalizer; 2] = [Normalizer::Identity, Normalizer::NfcTrim];

    pub fn id(self) -> &'static str {
        match self {
            Normalizer::Identity => "identity",
            Normalizer::NfcTrim => "nfc-trim",
        }
    }

    pub fn apply(self, text: &str) -> String {
        match self {
            Normalizer::Identity => text.to_string(),
            Normalizer::NfcTrim => {
                let nfc: String = text.nfc().collect();
                nfc.split_whitespace().collect::<Vec<_>>().join(" ")
            }
        }
    }
}

impl fmt::Display for Normalizer {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.id())
    }
}

impl FromStr for Normalizer {
    type Err = CorpusError;

    fn from_str(s: &str) -> Result<Self, CorpusError> {
        Self::ALL.into_iter().find(|n| n.id() == s).ok_or_else(|| CorpusError::UnknownNormalizer(s.to_string()))
    }
}

/// Applies the normaliser registered under `id`.
pub fn normalize_text(text: &str, id: &str) -> Result<String, CorpusError> {
    Ok(id.parse::<Normalizer>()?.apply(text))
}
