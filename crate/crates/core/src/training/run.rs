use std::fs::{self, File, OpenOptions};
use std::io::Write;
use std::path::Path;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::dsp::{mel_spectrogram, AudioClip, MelConfig, MelSpectrogram, StftConfig, CORPUS_SAMPLE_RATE};
use crate::flow::{loss_and_grad, FlowError, FlowModel, LossBreakdown};

use super::{checkpoint_file_name, sample_batch, AdamState, Checkpoint, RunConfig, TrainConfig, TrainError};

pub const METRICS_FILE: &str = "metrics.tsv";
pub const MAX_CONSECUTIVE_NONFINITE: u32 = 5;

/// Progress notifications from [`train`].
#[derive(Debug)]
pub enum TrainEvent<'a> {
    Step { iteration: u64, lr: f64, loss: &'a LossBreakdown },
    Skipped { iteration: u64, reason: String },
    Saved { iteration: u64, path: &'a Path },
}

/// One parsed line of the metrics log.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct MetricsRow {
    pub iteration: u64,
    pub lr: f64,
    pub z_term: f64,
    pub log_s_term: f64,
    pub log_det_w_term: f64,
    pub total: f64,
}

fn io_err(path: &Path) -> impl FnOnce(std::io::Error) -> TrainError + '_ {
    move |source| TrainError::Io { path: path.to_path_buf(), source }
}

fn metrics_line(iteration: u64, lr: f64, l: &LossBreakdown) -> String {
    format!("{iteration}\t{lr}\t{}\t{}\t{}\t{}\n", l.z_term, l.log_s_term, l.log_det_w_term, l.total)
}

pub fn read_metrics(path: impl AsRef<Path>) -> Result<Vec<MetricsRow>, TrainError> {
    let path = path.as_ref();
    let text = fs::read_to_string(path).map_err(io_err(path))?;
    text.lines()
        .enumerate()
        .map(|(i, line)| {
            let f: Vec<&str> = line.split('\t').collect();
            let bad = || TrainError::Config(format!("{}:{}: malformed metrics line", path.display(), i + 1));
            if f.len() != 6 {
                return Err(bad());
            }
            let num = |s: &str| s.parse::<f64>().map_err(|_| bad());
            Ok(MetricsRow {
                iteration: f[0].parse().map_err(|_| bad())?,
                lr: num(f[1])?,
                z_term: num(f[2])?,
                log_s_term: num(f[3])?,
                log_det_w_term: num(f[4])?,
                total: num(f[5])?,
            })
        })
        .collect()
}

/// Gradient of the mean loss over `batch`, then one Adam update.
///
/// On a non-finite loss or gradient the parameters and optimiser state are
/// left untouched and [`TrainError::NonFiniteLoss`] is returned.
pub fn training_step(
    model: &mut FlowModel<f32>,
    adam: &mut AdamState,
    batch: &[(Vec<f32>, MelSpectrogram)],
    cfg: &TrainConfig,
    lr: f64,
) -> Result<LossBreakdown, TrainError> {
    if batch.is_empty() {
        return Err(TrainError::Config("empty batch".into()));
    }
    let weight = 1.0 / batch.len() as f64;
    let mut grads = model.zeros_like();
    let mut losses = Vec::with_capacity(batch.len());
    for (segment, mel) in batch {
        let (x, cond) = model.prepare(segment, mel)?;
        match loss_and_grad(model, &x, &cond, cfg.sigma, weight, &mut grads) {
            Ok(l) => losses.push(l),
            Err(e @ (FlowError::NonFinite(_) | FlowError::NonFiniteScale)) => {
                return Err(TrainError::NonFiniteLoss(e.to_string()))
            }
            Err(e) => return Err(e.into()),
        }
    }
    if !grads.all_finite() {
        return Err(TrainError::NonFiniteLoss("gradient".into()));
    }
    adam.apply(model, &grads, lr, cfg);
    Ok(LossBreakdown::mean(&losses))
}

fn featurize(segments: Vec<AudioClip>, stft: &StftConfig, mel: &MelConfig) -> Result<Vec<(Vec<f32>, MelSpectrogram)>, TrainError> {
    segments
        .into_iter()
        .map(|seg| {
            let m = mel_spectrogram(&seg, stft, mel)?;
            Ok((seg.into_samples(), m))
        })
        .collect()
}

/// Keeps metrics lines up to `iteration` and drops the rest.
fn truncate_metrics(path: &Path, iteration: u64) -> Result<(), TrainError> {
    let kept: String = match fs::read_to_string(path) {
        Ok(text) => text
            .lines()
            .filter(|l| l.split('\t').next().and_then(|v| v.parse::<u64>().ok()).is_some_and(|i| i <= iteration))
            .map(|l| format!("{l}\n"))
            .collect(),
        Err(e) if e.kind() == std::io::ErrorKind::NotFound => String::new(),
        Err(e) => return Err(io_err(path)(e)),
    };
    fs::write(path, kept).map_err(io_err(path))
}

/// Runs (or resumes) training on `clips`.
///
/// Iterations are numbered from 1 in the metrics log. The run stops after
/// `stop_at` completed iterations, or after `epochs` passes over the clips
/// when `stop_at` is `None`. A checkpoint is written every
/// `iters_per_checkpoint` iterations and at the end.
pub fn train(
    clips: &[AudioClip],
    config: &RunConfig,
    out_dir: &Path,
    resume: Option<Checkpoint>,
    stop_at: Option<u64>,
    observer: &mut dyn FnMut(TrainEvent<'_>),
) -> Result<Checkpoint, TrainError> {
    config.validate()?;
    if clips.is_empty() {
        return Err(TrainError::CorpusEmpty);
    }
    for clip in clips {
        clip.require_rate(CORPUS_SAMPLE_RATE)?;
    }
    fs::create_dir_all(out_dir).map_err(io_err(out_dir))?;
    let metrics_path = out_dir.join(METRICS_FILE);

    let mut state = match resume {
        Some(ck) => {
            ck.ensure_flow(&config.flow)?;
            if ck.config != *config {
                return Err(TrainError::Incompatible("run settings differ from the checkpoint's".into()));
            }
            truncate_metrics(&metrics_path, ck.iteration)?;
            ck
        }
        None => {
            let mut rng = ChaCha8Rng::seed_from_u64(config.train.seed);
            let model = FlowModel::new(config.flow, &mut rng)?;
            File::create(&metrics_path).map_err(io_err(&metrics_path))?;
            Checkpoint::fresh(*config, model)
        }
    };

    let tc = config.train;
    let total = stop_at.unwrap_or_else(|| (tc.epochs * clips.len() as u64).div_ceil(tc.batch_size as u64));
    let mut metrics = OpenOptions::new().append(true).open(&metrics_path).map_err(io_err(&metrics_path))?;
    let mut strikes = 0u32;
    let mut last_saved = None;

    let save = |state: &Checkpoint, observer: &mut dyn FnMut(TrainEvent<'_>)| -> Result<(), TrainError> {
        let path = out_dir.join(checkpoint_file_name(state.iteration));
        state.save(&path)?;
        observer(TrainEvent::Saved { iteration: state.iteration, path: &path });
        Ok(())
    };

    while state.iteration < total {
        let i = state.iteration;
        let lr = tc.lr_at(i);
        let segments = sample_batch(clips, tc.seed, i, tc.batch_size, tc.segment_length);
        let batch = featurize(segments, &config.stft, &config.mel)?;
        match training_step(&mut state.model, &mut state.adam, &batch, &tc, lr) {
            Ok(loss) => {
                strikes = 0;
                metrics.write_all(metrics_line(i + 1, lr, &loss).as_bytes()).map_err(io_err(&metrics_path))?;
                metrics.flush().map_err(io_err(&metrics_path))?;
                observer(TrainEvent::Step { iteration: i + 1, lr, loss: &loss });
            }
            Err(TrainError::NonFiniteLoss(reason)) => {
                strikes += 1;
                observer(TrainEvent::Skipped { iteration: i + 1, reason });
                if strikes >= MAX_CONSECUTIVE_NONFINITE {
                    return Err(TrainError::NonFiniteAbort { iteration: i + 1, strikes });
                }
            }
            Err(e) => return Err(e),
        }
        state.iteration += 1;
        if state.iteration % tc.iters_per_checkpoint == 0 {
            save(&state, observer)?;
            last_saved = Some(state.iteration);
        }
    }
    if last_saved != Some(state.iteration) {
        save(&state, observer)?;
    }
    metrics.sync_all().map_err(io_err(&metrics_path))?;
    Ok(state)
}
