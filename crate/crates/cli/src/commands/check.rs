use std::path::Path;

use clap::ValueEnum;
use kwglow::flow::{check_grad, check_jacobian, check_roundtrip, CheckMode, FlowModel};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde_json::json;

use super::{load_checkpoint, load_config, write_file};
use crate::fail::{CmdResult, Failure};

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum CheckModeArg {
    Roundtrip,
    Jacobian,
    Grad,
}

impl From<CheckModeArg> for CheckMode {
    fn from(m: CheckModeArg) -> Self {
        match m {
            CheckModeArg::Roundtrip => CheckMode::Roundtrip,
            CheckModeArg::Jacobian => CheckMode::Jacobian,
            CheckModeArg::Grad => CheckMode::Grad,
        }
    }
}

#[derive(Clone, Copy, Debug)]
pub struct CheckBudget {
    pub draws: usize,
    pub probes: usize,
    pub seed: u64,
}

/// Steps of the squeezed input used by the roundtrip check.
const ROUNDTRIP_FRAMES: usize = 64;

pub fn check(
    checkpoint: Option<&Path>,
    config: Option<&Path>,
    mode: Option<CheckModeArg>,
    budget: CheckBudget,
    json_path: Option<&Path>,
) -> CmdResult {
    let model = match (checkpoint, config) {
        (Some(path), _) => {
            let ck = load_checkpoint(path)?;
            println!("checking {} (iteration {})", path.display(), ck.iteration);
            ck.model
        }
        (None, Some(path)) => {
            let config = load_config(path)?;
            println!("checking a fresh model from {} (seed {})", path.display(), budget.seed);
            FlowModel::<f32>::new(config.flow, &mut ChaCha8Rng::seed_from_u64(budget.seed))?
        }
        (None, None) => return Err(Failure::Usage("one of --checkpoint or --config is required".into())),
    };
    let modes: Vec<CheckMode> = match mode {
        Some(m) => vec![m.into()],
        None => CheckMode::ALL.to_vec(),
    };

    let mut reports = Vec::new();
    for mode in modes {
        let report = match mode {
            CheckMode::Roundtrip => check_roundtrip(&model, ROUNDTRIP_FRAMES, budget.draws, budget.seed)?,
            CheckMode::Jacobian => check_jacobian(&model, budget.draws, budget.seed)?,
            CheckMode::Grad => check_grad(&model, budget.probes, budget.seed)?,
        };
        println!("{report}");
        reports.push(report);
    }
    if let Some(path) = json_path {
        let list: Vec<_> = reports
            .iter()
            .map(|r| {
                json!({
                    "mode": r.mode.name(),
                    "max_error": r.max_error,
                    "tolerance": r.tolerance,
                    "passed": r.passed(),
                    "worst_at": r.worst_at,
                })
            })
            .collect();
        write_file(path, serde_json::to_string_pretty(&list).expect("reports serialise"))?;
    }
    let failed: Vec<&str> = reports.iter().filter(|r| !r.passed()).map(|r| r.mode.name()).collect();
    if failed.is_empty() {
        Ok(())
    } else {
        Err(Failure::Runtime(format!("over tolerance: {}", failed.join(", "))))
    }
}
