use crate::textmap::{TextMap, TextMapError};

use super::FlowError;

/// How mel frames are stretched to the squeezed time axis.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Upsampler {
    /// Each mel frame is repeated `hop / group_size` times. No parameters.
    Repeat,
}

/// Topology of the flow stack.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct FlowConfig {
    pub n_mel_channels: usize,
    pub n_flows: usize,
    pub group_size: usize,
    pub early_every: usize,
    pub early_size: usize,
    pub wn_layers: usize,
    pub wn_channels: usize,
    pub wn_kernel: usize,
    pub sigma_train: f64,
    pub upsampler: Upsampler,
}

impl Default for FlowConfig {
    fn default() -> Self {
        Self {
            n_mel_channels: 80,
            n_flows: 12,
            group_size: 8,
            early_every: 4,
            early_size: 2,
            wn_layers: 8,
            wn_channels: 256,
            wn_kernel: 3,
            sigma_train: 1.0,
            upsampler: Upsampler::Repeat,
        }
    }
}

const KEYS: &[&str] = &[
    "n_mel_channels",
    "n_flows",
    "group_size",
    "early_every",
    "early_size",
    "wn_layers",
    "wn_channels",
    "wn_kernel",
    "sigma_train",
    "upsampler",
];

impl FlowConfig {
    /// A few-thousand-parameter model for tests and desk-scale runs.
    pub fn tiny() -> Self {
        Self { n_flows: 4, group_size: 8, early_every: 2, early_size: 2, wn_layers: 2, wn_channels: 16, ..Self::default() }
    }

    /// Flows emit `early_size` channels before flow `k` whenever
    /// `k % early_every == 0` (0-based, `k > 0`).
    pub fn emits_before(&self, k: usize) -> bool {
        k > 0 && k < self.n_flows && k.is_multiple_of(self.early_every)
    }

    /// Channel count each flow operates on.
    pub fn live_channels(&self) -> Vec<usize> {
        let mut live = self.group_size;
        (0..self.n_flows)
            .map(|k| {
                if self.emits_before(k) {
                    live = live.saturating_sub(self.early_size);
                }
                live
            })
            .collect()
    }

    /// Row counts of the latent chunks in emission order.
    pub fn emission_sizes(&self) -> Vec<usize> {
        let mut sizes: Vec<usize> = (0..self.n_flows).filter(|&k| self.emits_before(k)).map(|_| self.early_size).collect();
        sizes.push(*self.live_channels().last().unwrap_or(&self.group_size));
        sizes
    }

    pub fn validate(&self) -> Result<(), FlowError> {
        let bad = |m: String| Err(FlowError::Config(m));
        if self.n_flows == 0 || self.early_every == 0 {
            return bad("n_flows and early_every must be at least 1".into());
        }
        if self.group_size < 2 {
            return bad(format!("group_size {} must be at least 2", self.group_size));
        }
        if self.n_mel_channels == 0 || self.wn_layers == 0 || self.wn_channels == 0 {
            return bad("n_mel_channels, wn_layers and wn_channels must be positive".into());
        }
        if self.wn_kernel.is_multiple_of(2) {
            return bad(format!("wn_kernel {} must be odd", self.wn_kernel));
        }
        if !(self.sigma_train > 0.0 && self.sigma_train.is_finite()) {
            return bad("sigma_train must be positive".into());
        }
        let emitted = self.early_size * (self.emission_sizes().len() - 1);
        if emitted + 2 > self.group_size {
            return bad(format!(
                "early outputs remove {emitted} of {} channels; at least 2 must remain",
                self.group_size
            ));
        }
        Ok(())
    }

    pub fn to_textmap(&self) -> TextMap {
        let mut m = TextMap::new();
        m.insert("n_mel_channels", self.n_mel_channels);
        m.insert("n_flows", self.n_flows);
        m.insert("group_size", self.group_size);
        m.insert("early_every", self.early_every);
        m.insert("early_size", self.early_size);
        m.insert("wn_layers", self.wn_layers);
        m.insert("wn_channels", self.wn_channels);
        m.insert("wn_kernel", self.wn_kernel);
        m.insert("sigma_train", self.sigma_train);
        m.insert("upsampler", "repeat");
        m
    }

    /// Missing keys keep their defaults; unknown keys are rejected.
    pub fn from_textmap(m: &TextMap) -> Result<Self, TextMapError> {
        m.reject_unknown(KEYS)?;
        let d = Self::default();
        let upsampler = match m.get("upsampler") {
            None | Some("repeat") => Upsampler::Repeat,
            Some(other) => return Err(TextMapError::Invalid { key: "upsampler".into(), value: other.into() }),
        };
        Ok(Self {
            n_mel_channels: m.parse_opt("n_mel_channels")?.unwrap_or(d.n_mel_channels),
            n_flows: m.parse_opt("n_flows")?.unwrap_or(d.n_flows),
            group_size: m.parse_opt("group_size")?.unwrap_or(d.group_size),
            early_every: m.parse_opt("early_every")?.unwrap_or(d.early_every),
            early_size: m.parse_opt("early_size")?.unwrap_or(d.early_size),
            wn_layers: m.parse_opt("wn_layers")?.unwrap_or(d.wn_layers),
            wn_channels: m.parse_opt("wn_channels")?.unwrap_or(d.wn_channels),
            wn_kernel: m.parse_opt("wn_kernel")?.unwrap_or(d.wn_kernel),
            sigma_train: m.parse_opt("sigma_train")?.unwrap_or(d.sigma_train),
            upsampler,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn default_channel_schedule() {
        let c = FlowConfig::default();
        assert_eq!(c.live_channels(), vec![8, 8, 8, 8, 6, 6, 6, 6, 4, 4, 4, 4]);
        assert_eq!(c.emission_sizes(), vec![2, 2, 4]);
        assert_eq!(c.emission_sizes().iter().sum::<usize>(), c.group_size);
        c.validate().unwrap();
    }

    #[test]
    fn over_emitting_config_rejected() {
        let c = FlowConfig { group_size: 4, early_every: 1, early_size: 1, n_flows: 4, ..FlowConfig::default() };
        assert!(c.validate().is_err());
        let c = FlowConfig { wn_kernel: 2, ..FlowConfig::default() };
        assert!(c.validate().is_err());
    }

    #[test]
    fn textmap_round_trip() {
        let c = FlowConfig::tiny();
        assert_eq!(FlowConfig::from_textmap(&c.to_textmap()).unwrap(), c);
        let m = TextMap::from_text("bogus = 1").unwrap();
        assert!(FlowConfig::from_textmap(&m).is_err());
    }
}
