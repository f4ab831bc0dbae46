//! `kwglow`: preprocess a corpus, train, synthesize, verify a model, score
//! listening tests and serve them.
//!
//! Exit codes: 0 success, 1 usage error, 2 data error, 3 runtime error.

mod commands;
mod fail;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{ArgGroup, Parser, Subcommand};
use clap::error::ErrorKind;

use commands::CheckModeArg;
use fail::Failure;

#[derive(Debug, Parser)]
#[command(name = "kwglow", version, about = "Flow-based neural vocoder toolkit")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Audit a manifest and write one mel feature file per training utterance.
    Preprocess {
        /// Corpus manifest (TSV: id, split, category, audio_path, text).
        #[arg(long)]
        manifest: PathBuf,
        /// Directory for feature files and the audit report.
        #[arg(long)]
        out_dir: PathBuf,
        /// Transcript normalizer: identity or nfc-trim.
        #[arg(long, default_value = "identity")]
        normalizer: String,
        /// Also write the audit report as JSON.
        #[arg(long)]
        json: Option<PathBuf>,
    },
    /// Train a model on the training split of a manifest.
    Train {
        #[arg(long)]
        manifest: PathBuf,
        /// Directory for checkpoints and metrics.tsv.
        #[arg(long)]
        out_dir: PathBuf,
        /// Run configuration in `key = value` form; defaults apply to missing keys.
        #[arg(long)]
        config: Option<PathBuf>,
        /// Continue from this checkpoint.
        #[arg(long)]
        resume: Option<PathBuf>,
        /// Stop after this many completed iterations.
        #[arg(long)]
        iterations: Option<u64>,
    },
    /// Vocode a mel feature file or the features of a WAV file.
    #[command(group(ArgGroup::new("input").required(true).args(["mel", "wav"])))]
    Synthesize {
        #[arg(long)]
        checkpoint: PathBuf,
        /// KMEL1 feature file.
        #[arg(long)]
        mel: Option<PathBuf>,
        /// 22.05 kHz WAV whose features are extracted first.
        #[arg(long)]
        wav: Option<PathBuf>,
        /// Output WAV.
        #[arg(long)]
        out: PathBuf,
        /// Standard deviation of the latent.
        #[arg(long, default_value_t = 1.0)]
        sigma: f64,
        #[arg(long, default_value_t = 0)]
        seed: u64,
    },
    /// Verify invertibility, log-determinants and gradients of a model.
    #[command(group(ArgGroup::new("source").required(true).args(["checkpoint", "config"])))]
    Check {
        #[arg(long)]
        checkpoint: Option<PathBuf>,
        /// Run configuration; checks a freshly initialised model.
        #[arg(long)]
        config: Option<PathBuf>,
        /// Run one check only; all three by default.
        #[arg(long, value_enum)]
        mode: Option<CheckModeArg>,
        /// Random inputs per roundtrip or jacobian check.
        #[arg(long, default_value_t = 20)]
        draws: usize,
        /// Finite-difference probes for the gradient check.
        #[arg(long, default_value_t = 64)]
        probes: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Also write the reports as JSON.
        #[arg(long)]
        json: Option<PathBuf>,
    },
    /// Mean opinion scores from a ratings CSV.
    Mos {
        #[arg(long)]
        ratings: PathBuf,
        /// More ratings files; prints a category by model matrix over all files.
        #[arg(long, num_args = 1..)]
        compare: Vec<PathBuf>,
        /// Also write the reports as JSON.
        #[arg(long)]
        json: Option<PathBuf>,
    },
    /// Run the listening-test HTTP service until interrupted.
    Serve {
        /// Directory holding samples.tsv and its audio.
        #[arg(long)]
        samples: PathBuf,
        #[arg(long)]
        port: u16,
        /// Ratings CSV, appended to and replayed on start.
        #[arg(long)]
        out: PathBuf,
        /// Address to listen on.
        #[arg(long, default_value = "127.0.0.1")]
        host: std::net::IpAddr,
        /// Seed of the per-session sample shuffle.
        #[arg(long, default_value_t = 0)]
        seed: u64,
    },
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return match e.kind() {
                ErrorKind::DisplayHelp | ErrorKind::DisplayVersion => ExitCode::SUCCESS,
                _ => Failure::Usage(String::new()).exit_code(),
            };
        }
    };
    let result = match cli.command {
        Command::Preprocess { manifest, out_dir, normalizer, json } => {
            commands::preprocess(&manifest, &out_dir, &normalizer, json.as_deref())
        }
        Command::Train { manifest, out_dir, config, resume, iterations } => {
            commands::train(&manifest, &out_dir, config.as_deref(), resume.as_deref(), iterations)
        }
        Command::Synthesize { checkpoint, mel, wav, out, sigma, seed } => {
            commands::synthesize(&checkpoint, mel.as_deref(), wav.as_deref(), &out, sigma, seed)
        }
        Command::Check { checkpoint, config, mode, draws, probes, seed, json } => commands::check(
            checkpoint.as_deref(),
            config.as_deref(),
            mode,
            commands::CheckBudget { draws, probes, seed },
            json.as_deref(),
        ),
        Command::Mos { ratings, compare, json } => commands::mos(&ratings, &compare, json.as_deref()),
        Command::Serve { samples, port, out, host, seed } => commands::serve(&samples, (host, port).into(), &out, seed),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => {
            eprintln!("kwglow: {f}");
            f.exit_code()
        }
    }
}
