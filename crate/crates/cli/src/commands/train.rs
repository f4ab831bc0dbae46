use std::path::Path;

use kwglow::corpus::{load_manifest, Normalizer, Split};
use kwglow::dsp::load_wav;
use kwglow::training::{self, RunConfig, TrainEvent};

use super::{load_checkpoint, load_config};
use crate::fail::CmdResult;

pub fn train(
    manifest_path: &Path,
    out_dir: &Path,
    config_path: Option<&Path>,
    resume: Option<&Path>,
    iterations: Option<u64>,
) -> CmdResult {
    let resume = resume.map(load_checkpoint).transpose()?;
    let config = match (config_path, &resume) {
        (Some(path), _) => load_config(path)?,
        (None, Some(ck)) => ck.config,
        (None, None) => RunConfig::default(),
    };
    config.validate()?;
    let t = &config.train;
    println!("# run configuration");
    print!("{}", config.to_textmap().to_text());
    println!("# batch {} lr {:e} seed {}", t.batch_size, t.learning_rate, t.seed);

    let manifest = load_manifest(manifest_path, Normalizer::Identity)?;
    let clips = manifest.split(Split::Train).map(|r| load_wav(manifest.resolve(r))).collect::<Result<Vec<_>, _>>()?;

    let last = training::train(&clips, &config, out_dir, resume, iterations, &mut |event| match event {
        TrainEvent::Step { iteration, lr, loss } => println!("iter {iteration}\tlr {lr:e}\tloss {:.6}", loss.total),
        TrainEvent::Skipped { iteration, reason } => eprintln!("iter {iteration} skipped: {reason}"),
        TrainEvent::Saved { path, .. } => println!("saved {}", path.display()),
    })?;
    println!("finished at iteration {}", last.iteration);
    Ok(())
}
