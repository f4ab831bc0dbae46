//! Maximum-likelihood training: Adam with bias correction, a stepwise
//! exponential learning-rate decay, seeded batch sampling, checkpoints and
//! a per-iteration metrics log.

mod adam;
mod checkpoint;
mod config;
mod data;
mod run;

use std::path::PathBuf;

use thiserror::Error;

use crate::dsp::DspError;
use crate::flow::FlowError;

pub use adam::{adam_update, AdamState};
pub use checkpoint::{checkpoint_file_name, Checkpoint, CHECKPOINT_MAGIC, FORMAT_VERSION};
pub use config::{RunConfig, TrainConfig};
pub use data::{epoch_order, sample_batch};
pub use run::{read_metrics, train, training_step, MetricsRow, TrainEvent, METRICS_FILE, MAX_CONSECUTIVE_NONFINITE};

#[derive(Debug, Error)]
pub enum TrainError {
    #[error("invalid training configuration: {0}")]
    Config(String),
    #[error("no training utterances")]
    CorpusEmpty,
    #[error("non-finite loss or gradient: {0}")]
    NonFiniteLoss(String),
    #[error("aborted after {strikes} consecutive non-finite iterations (last at iteration {iteration})")]
    NonFiniteAbort { iteration: u64, strikes: u32 },
    #[error("unsupported checkpoint version: {0}")]
    VersionMismatch(String),
    #[error("corrupt checkpoint: {0}")]
    CorruptFile(String),
    #[error("checkpoint does not fit this configuration: {0}")]
    Incompatible(String),
    #[error(transparent)]
    Flow(#[from] FlowError),
    #[error(transparent)]
    Dsp(#[from] DspError),
    #[error("I/O failure on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}
