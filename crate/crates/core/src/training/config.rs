use sha2::{Digest, Sha256};

use crate::dsp::{MelConfig, StftConfig};
use crate::flow::FlowConfig;
use crate::textmap::{TextMap, TextMapError};

use super::TrainError;

/// Optimiser, schedule and data-sampling settings.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct TrainConfig {
    pub batch_size: usize,
    pub learning_rate: f64,
    /// Multiplier applied once per `lr_decay_interval` iterations.
    pub lr_decay_gamma: f64,
    pub lr_decay_interval: u64,
    pub beta1: f64,
    pub beta2: f64,
    pub adam_epsilon: f64,
    /// One epoch is one pass over the training utterances.
    pub epochs: u64,
    pub sigma: f64,
    pub iters_per_checkpoint: u64,
    pub seed: u64,
    pub segment_length: usize,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            batch_size: 22,
            learning_rate: 1e-4,
            lr_decay_gamma: 0.999,
            lr_decay_interval: 1000,
            beta1: 0.9,
            beta2: 0.999,
            adam_epsilon: 1e-8,
            epochs: 100_000,
            sigma: 1.0,
            iters_per_checkpoint: 2000,
            seed: 1234,
            segment_length: 16_000,
        }
    }
}

const TRAIN_KEYS: &[&str] = &[
    "batch_size",
    "learning_rate",
    "lr_decay_gamma",
    "lr_decay_interval",
    "beta1",
    "beta2",
    "adam_epsilon",
    "epochs",
    "sigma",
    "iters_per_checkpoint",
    "seed",
    "segment_length",
];

impl TrainConfig {
    pub fn validate(&self) -> Result<(), TrainError> {
        let bad = |m: &str| Err(TrainError::Config(m.to_string()));
        if self.batch_size == 0 {
            return bad("batch_size must be at least 1");
        }
        if !(self.learning_rate > 0.0 && self.learning_rate.is_finite()) {
            return bad("learning_rate must be positive");
        }
        if !(0.0..1.0).contains(&self.beta1) || !(0.0..1.0).contains(&self.beta2) {
            return bad("beta1 and beta2 must lie in [0, 1)");
        }
        if !(self.adam_epsilon > 0.0) {
            return bad("adam_epsilon must be positive");
        }
        if !(self.lr_decay_gamma > 0.0 && self.lr_decay_gamma <= 1.0) || self.lr_decay_interval == 0 {
            return bad("lr_decay_gamma must be in (0, 1] and lr_decay_interval positive");
        }
        if !(self.sigma > 0.0 && self.sigma.is_finite()) {
            return bad("sigma must be positive");
        }
        if self.iters_per_checkpoint == 0 || self.segment_length == 0 || self.epochs == 0 {
            return bad("iters_per_checkpoint, segment_length and epochs must be positive");
        }
        Ok(())
    }

    /// `learning_rate · gamma^⌊iteration / interval⌋`.
    pub fn lr_at(&self, iteration: u64) -> f64 {
        let steps = (iteration / self.lr_decay_interval) as i32;
        self.learning_rate * self.lr_decay_gamma.powi(steps)
    }

    pub fn to_textmap(&self) -> TextMap {
        let mut m = TextMap::new();
        m.insert("batch_size", self.batch_size);
        m.insert("learning_rate", self.learning_rate);
        m.insert("lr_decay_gamma", self.lr_decay_gamma);
        m.insert("lr_decay_interval", self.lr_decay_interval);
        m.insert("beta1", self.beta1);
        m.insert("beta2", self.beta2);
        m.insert("adam_epsilon", self.adam_epsilon);
        m.insert("epochs", self.epochs);
        m.insert("sigma", self.sigma);
        m.insert("iters_per_checkpoint", self.iters_per_checkpoint);
        m.insert("seed", self.seed);
        m.insert("segment_length", self.segment_length);
        m
    }

    pub fn from_textmap(m: &TextMap) -> Result<Self, TextMapError> {
        m.reject_unknown(TRAIN_KEYS)?;
        let d = Self::default();
        Ok(Self {
            batch_size: m.parse_opt("batch_size")?.unwrap_or(d.batch_size),
            learning_rate: m.parse_opt("learning_rate")?.unwrap_or(d.learning_rate),
            lr_decay_gamma: m.parse_opt("lr_decay_gamma")?.unwrap_or(d.lr_decay_gamma),
            lr_decay_interval: m.parse_opt("lr_decay_interval")?.unwrap_or(d.lr_decay_interval),
            beta1: m.parse_opt("beta1")?.unwrap_or(d.beta1),
            beta2: m.parse_opt("beta2")?.unwrap_or(d.beta2),
            adam_epsilon: m.parse_opt("adam_epsilon")?.unwrap_or(d.adam_epsilon),
            epochs: m.parse_opt("epochs")?.unwrap_or(d.epochs),
            sigma: m.parse_opt("sigma")?.unwrap_or(d.sigma),
            iters_per_checkpoint: m.parse_opt("iters_per_checkpoint")?.unwrap_or(d.iters_per_checkpoint),
            seed: m.parse_opt("seed")?.unwrap_or(d.seed),
            segment_length: m.parse_opt("segment_length")?.unwrap_or(d.segment_length),
        })
    }

    /// SHA-256 of the canonical text form, hex encoded.
    pub fn hash(&self) -> String {
        let digest = Sha256::digest(self.to_textmap().to_text().as_bytes());
        digest.iter().map(|b| format!("{b:02x}")).collect()
    }
}

/// Everything a run needs, stored as `flow.*`, `stft.*`, `mel.*` and
/// `train.*` sections of one text map. The same layout is the config-file
/// format and the core of every checkpoint header.
#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct RunConfig {
    pub flow: FlowConfig,
    pub stft: StftConfig,
    pub mel: MelConfig,
    pub train: TrainConfig,
}

impl RunConfig {
    /// The tiny flow with the default front end and optimiser.
    pub fn tiny() -> Self {
        Self { flow: FlowConfig::tiny(), ..Self::default() }
    }

    pub fn validate(&self) -> Result<(), TrainError> {
        self.flow.validate()?;
        self.stft.validate()?;
        self.mel.validate(crate::dsp::CORPUS_SAMPLE_RATE)?;
        self.train.validate()?;
        if self.flow.n_mel_channels != self.mel.n_mels {
            return Err(TrainError::Config(format!(
                "flow expects {} mel channels, front end makes {}",
                self.flow.n_mel_channels, self.mel.n_mels
            )));
        }
        if !self.train.segment_length.is_multiple_of(self.flow.group_size) {
            return Err(TrainError::Config(format!(
                "segment_length {} is not a multiple of group_size {}",
                self.train.segment_length, self.flow.group_size
            )));
        }
        Ok(())
    }

    pub fn to_textmap(&self) -> TextMap {
        let mut m = TextMap::new();
        m.extend_prefixed("flow.", &self.flow.to_textmap());
        m.extend_prefixed("stft.", &self.stft.to_textmap());
        m.extend_prefixed("mel.", &self.mel.to_textmap());
        m.extend_prefixed("train.", &self.train.to_textmap());
        m
    }

    /// Reads the four sections; missing keys take defaults and keys outside
    /// the sections are rejected.
    pub fn from_textmap(m: &TextMap) -> Result<Self, TextMapError> {
        let sections = ["flow.", "stft.", "mel.", "train."];
        if let Some(k) = m.keys().find(|k| !sections.iter().any(|s| k.starts_with(s))) {
            return Err(TextMapError::Unknown(k.to_string()));
        }
        Ok(Self {
            flow: FlowConfig::from_textmap(&m.section("flow."))?,
            stft: StftConfig::from_textmap(&m.section("stft."))?,
            mel: MelConfig::from_textmap(&m.section("mel."))?,
            train: TrainConfig::from_textmap(&m.section("train."))?,
        })
    }

    pub fn from_text(text: &str) -> Result<Self, TextMapError> {
        Self::from_textmap(&TextMap::from_text(text)?)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults() {
        let c = TrainConfig::default();
        assert_eq!((c.batch_size, c.learning_rate, c.seed, c.iters_per_checkpoint), (22, 1e-4, 1234, 2000));
        assert_eq!((c.beta1, c.beta2, c.sigma, c.segment_length), (0.9, 0.999, 1.0, 16_000));
        c.validate().unwrap();
        RunConfig::default().validate().unwrap();
    }

    #[test]
    fn learning_rate_schedule() {
        let c = TrainConfig::default();
        assert_eq!(c.lr_at(0), 1e-4);
        assert_eq!(c.lr_at(999), 1e-4);
        assert!((c.lr_at(1000) - 9.99e-5).abs() < 1e-18);
        let flat = TrainConfig { lr_decay_gamma: 1.0, ..c };
        assert_eq!(flat.lr_at(123_456_789), 1e-4);
        let mut prev = f64::INFINITY;
        for i in (0..50_000).step_by(777) {
            assert!(c.lr_at(i) <= prev);
            prev = c.lr_at(i);
        }
    }

    #[test]
    fn run_config_text_round_trip() {
        let mut c = RunConfig::tiny();
        c.train.batch_size = 4;
        c.train.learning_rate = 3e-4;
        let back = RunConfig::from_text(&c.to_textmap().to_text()).unwrap();
        assert_eq!(back, c);
        assert_eq!(back.train.hash(), c.train.hash());
        assert_ne!(TrainConfig::default().hash(), c.train.hash());
        assert!(RunConfig::from_text("batch_size = 3").is_err());
        assert_eq!(RunConfig::from_text("train.batch_size = 3").unwrap().train.batch_size, 3);
    }

    #[test]
    fn invalid_values_rejected() {
        for c in [
            TrainConfig { batch_size: 0, ..TrainConfig::default() },
            TrainConfig { learning_rate: 0.0, ..TrainConfig::default() },
            TrainConfig { beta2: 1.0, ..TrainConfig::default() },
        ] {
            assert!(c.validate().is_err());
        }
        let odd = RunConfig { train: TrainConfig { segment_length: 1001, ..TrainConfig::default() }, ..RunConfig::default() };
        assert!(odd.validate().is_err());
    }
}
