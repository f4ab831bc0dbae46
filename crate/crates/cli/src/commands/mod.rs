mod check;
mod mos;
mod preprocess;
mod serve;
mod synthesize;
mod train;

use std::fs;
use std::path::Path;

use kwglow::training::{Checkpoint, RunConfig};

use crate::fail::{data, runtime, Failure};

pub use check::{check, CheckBudget, CheckModeArg};
pub use mos::mos;
pub use preprocess::preprocess;
pub use serve::serve;
pub use synthesize::synthesize;
pub use train::train;

/// Reads and validates a `key = value` run configuration.
fn load_config(path: &Path) -> Result<RunConfig, Failure> {
    let text = fs::read_to_string(path).map_err(|e| data(format!("{}: {e}", path.display())))?;
    let config = RunConfig::from_text(&text).map_err(|e| data(format!("{}: {e}", path.display())))?;
    config.validate()?;
    Ok(config)
}

/// Any failure to read a checkpoint, missing file included, is bad input.
fn load_checkpoint(path: &Path) -> Result<Checkpoint, Failure> {
    Checkpoint::load(path).map_err(|e| data(format!("{}: {e}", path.display())))
}

fn write_file(path: &Path, contents: impl AsRef<[u8]>) -> Result<(), Failure> {
    fs::write(path, contents).map_err(|e| runtime(format!("cannot write {}: {e}", path.display())))
}
