//! Checkpoint container.
//!
//! Layout: the magic `KWGLOW1`, the header length as `u32` little-endian,
//! a [`TextMap`] header, then every parameter as raw `f32` little-endian in
//! header order, then the Adam first moments, then the second moments in
//! the same order.

use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use crate::flow::{FlowConfig, FlowError, FlowModel};
use crate::textmap::TextMap;
use crate::Tensor;

use super::{AdamState, RunConfig, TrainError};

pub const CHECKPOINT_MAGIC: &[u8; 7] = b"KWGLOW1";
pub const FORMAT_VERSION: u32 = 1;

/// Model, optimiser and position of a run.
#[derive(Clone, Debug, PartialEq)]
pub struct Checkpoint {
    pub config: RunConfig,
    pub model: FlowModel<f32>,
    pub adam: AdamState,
    /// Completed iterations.
    pub iteration: u64,
}

fn corrupt(msg: impl Into<String>) -> TrainError {
    TrainError::CorruptFile(msg.into())
}

fn shape_text(shape: &[usize]) -> String {
    shape.iter().map(|d| d.to_string()).collect::<Vec<_>>().join("x")
}

fn parse_shape(text: &str) -> Option<Vec<usize>> {
    text.split('x').map(|d| d.parse().ok()).collect()
}

/// Name of the checkpoint written after `iteration` completed iterations.
pub fn checkpoint_file_name(iteration: u64) -> String {
    format!("checkpoint_{iteration:08}.kwg")
}

impl Checkpoint {
    /// A fresh run: iteration 0, zero moments.
    pub fn fresh(config: RunConfig, model: FlowModel<f32>) -> Self {
        let adam = AdamState::new(&model);
        Self { config, model, adam, iteration: 0 }
    }

    fn header(&self) -> TextMap {
        let mut h = self.config.to_textmap();
        h.insert("format_version", FORMAT_VERSION);
        h.insert("train_config_hash", self.config.train.hash());
        h.insert("iteration", self.iteration);
        h.insert("rng.seed", self.config.train.seed);
        h.insert("rng.position", self.iteration * self.config.train.batch_size as u64);
        h.insert("adam.step", self.adam.step);
        let params = self.model.named_parameters();
        h.insert("params.count", params.len());
        for (i, (name, t)) in params.iter().enumerate() {
            h.insert(format!("params.{i:05}.name"), name);
            h.insert(format!("params.{i:05}.shape"), shape_text(t.shape()));
        }
        h
    }

    pub fn to_bytes(&self) -> Vec<u8> {
        let header = self.header().to_text();
        let mut out = Vec::with_capacity(header.len() + 16 + 12 * self.model.parameter_count());
        out.extend_from_slice(CHECKPOINT_MAGIC);
        out.extend_from_slice(&(header.len() as u32).to_le_bytes());
        out.extend_from_slice(header.as_bytes());
        for model in [&self.model, &self.adam.m, &self.adam.v] {
            for (_, t) in model.named_parameters() {
                for v in t.data() {
                    out.extend_from_slice(&v.to_le_bytes());
                }
            }
        }
        out
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self, TrainError> {
        let magic_len = CHECKPOINT_MAGIC.len();
        if bytes.len() < magic_len + 4 {
            return Err(corrupt("file shorter than its fixed header"));
        }
        if bytes[..magic_len - 1] != CHECKPOINT_MAGIC[..magic_len - 1] {
            return Err(corrupt("bad magic"));
        }
        if bytes[magic_len - 1] != CHECKPOINT_MAGIC[magic_len - 1] {
            return Err(TrainError::VersionMismatch(format!(
                "container version byte {:?}, expected {:?}",
                bytes[magic_len - 1] as char,
                CHECKPOINT_MAGIC[magic_len - 1] as char
            )));
        }
        let header_len = u32::from_le_bytes(bytes[magic_len..magic_len + 4].try_into().unwrap()) as usize;
        let body_start = magic_len + 4 + header_len;
        let header_bytes = bytes.get(magic_len + 4..body_start).ok_or_else(|| corrupt("truncated header"))?;
        let text = std::str::from_utf8(header_bytes).map_err(|_| corrupt("header is not UTF-8"))?;
        let h = TextMap::from_text(text).map_err(|e| corrupt(format!("header: {e}")))?;

        let version: u32 = h.parse("format_version").map_err(|e| corrupt(e.to_string()))?;
        if version != FORMAT_VERSION {
            return Err(TrainError::VersionMismatch(format!("format_version {version}, expected {FORMAT_VERSION}")));
        }
        let meta = |h: &TextMap, k: &str| -> Result<u64, TrainError> { h.parse(k).map_err(|e| corrupt(e.to_string())) };
        let iteration = meta(&h, "iteration")?;
        let adam_step = meta(&h, "adam.step")?;
        let count = meta(&h, "params.count")? as usize;
        let stored_hash = h.require("train_config_hash").map_err(|e| corrupt(e.to_string()))?.to_string();

        let mut entries = Vec::with_capacity(count);
        for i in 0..count {
            let name = h.require(&format!("params.{i:05}.name")).map_err(|e| corrupt(e.to_string()))?.to_string();
            let shape_raw = h.require(&format!("params.{i:05}.shape")).map_err(|e| corrupt(e.to_string()))?;
            let shape = parse_shape(shape_raw).ok_or_else(|| corrupt(format!("bad shape `{shape_raw}` for {name}")))?;
            entries.push((name, shape));
        }

        // Strip bookkeeping keys so the remainder is exactly a run config.
        let mut config_map = TextMap::new();
        for (k, v) in h.iter() {
            let bookkeeping = k.starts_with("params.")
                || k.starts_with("rng.")
                || k.starts_with("adam.")
                || ["format_version", "iteration", "train_config_hash"].contains(&k);
            if !bookkeeping {
                config_map.insert(k, v);
            }
        }
        let config = RunConfig::from_textmap(&config_map).map_err(|e| corrupt(format!("config: {e}")))?;
        if config.train.hash() != stored_hash {
            return Err(corrupt("train_config_hash does not match the stored train settings"));
        }

        let floats: usize = entries.iter().map(|(_, s)| s.iter().product::<usize>()).sum();
        let expected_len = body_start + 3 * 4 * floats;
        if bytes.len() != expected_len {
            return Err(corrupt(format!("expected {expected_len} bytes, found {}", bytes.len())));
        }
        let mut cursor = body_start;
        let mut read_set = || {
            entries
                .iter()
                .map(|(name, shape)| {
                    let n: usize = shape.iter().product();
                    let data = bytes[cursor..cursor + 4 * n]
                        .chunks_exact(4)
                        .map(|c| f32::from_le_bytes(c.try_into().unwrap()))
                        .collect();
                    cursor += 4 * n;
                    (name.clone(), Tensor::from_vec(shape, data).expect("length checked"))
                })
                .collect::<Vec<_>>()
        };
        let (params, m, v) = (read_set(), read_set(), read_set());

        let model = FlowModel::from_named(config.flow, params).map_err(incompatible)?;
        // Moments share the parameter shapes but not the invertibility check.
        let mirror = |t: Vec<(String, Tensor<f32>)>| {
            let mut out = model.zeros_like();
            for (slot, (_, t)) in out.tensors_mut().into_iter().zip(t) {
                *slot = t;
            }
            out
        };
        let adam = AdamState { m: mirror(m), v: mirror(v), step: adam_step };
        Ok(Self { config, model, adam, iteration })
    }

    /// Writes to a temporary sibling and renames it into place.
    pub fn save(&self, path: impl AsRef<Path>) -> Result<(), TrainError> {
        let path = path.as_ref();
        let tmp = path.with_extension("kwg.tmp");
        let io = |e| TrainError::Io { path: tmp.clone(), source: e };
        let mut f = fs::File::create(&tmp).map_err(io)?;
        f.write_all(&self.to_bytes()).map_err(io)?;
        f.sync_all().map_err(io)?;
        drop(f);
        fs::rename(&tmp, path).map_err(|e| TrainError::Io { path: path.to_path_buf(), source: e })
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self, TrainError> {
        let path = path.as_ref();
        let bytes = fs::read(path).map_err(|e| TrainError::Io { path: path.to_path_buf(), source: e })?;
        Self::from_bytes(&bytes)
    }

    /// Fails unless `flow` matches the stored topology.
    pub fn ensure_flow(&self, flow: &FlowConfig) -> Result<(), TrainError> {
        if &self.config.flow != flow {
            return Err(TrainError::Incompatible(format!(
                "checkpoint topology {:?} differs from requested {:?}",
                self.config.flow, flow
            )));
        }
        Ok(())
    }

    /// Path of the newest `checkpoint_*.kwg` in `dir`, if any.
    pub fn latest_in(dir: impl AsRef<Path>) -> Option<PathBuf> {
        let mut found: Vec<PathBuf> = fs::read_dir(dir)
            .ok()?
            .filter_map(|e| e.ok().map(|e| e.path()))
            .filter(|p| {
                p.file_name()
                    .and_then(|n| n.to_str())
                    .is_some_and(|n| n.starts_with("checkpoint_") && n.ends_with(".kwg"))
            })
            .collect();
        found.sort();
        found.pop()
    }
}

fn incompatible(e: FlowError) -> TrainError {
    TrainError::Incompatible(e.to_string())
}
