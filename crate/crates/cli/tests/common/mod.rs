#![allow(dead_code)]

use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use kwglow::dsp::{save_wav, AudioClip, CORPUS_SAMPLE_RATE};
use kwglow::flow::FlowModel;
use kwglow::training::{Checkpoint, RunConfig};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// Small flow and short segments so CLI runs take well under a second per
/// iteration.
pub const TINY_CONFIG: &str = "\
flow.n_flows = 4
flow.early_every = 2
flow.wn_layers = 2
flow.wn_channels = 16
train.batch_size = 2
train.segment_length = 4000
train.iters_per_checkpoint = 5
";

pub fn kwglow(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_kwglow")).args(args).output().expect("binary runs")
}

pub fn code(out: &Output) -> i32 {
    out.status.code().expect("exited normally")
}

pub fn stdout(out: &Output) -> String {
    String::from_utf8_lossy(&out.stdout).into_owned()
}

pub fn s(p: &Path) -> &str {
    p.to_str().expect("utf-8 temp path")
}

/// A sine with a little noise.
pub fn tone(len: usize, hz: f64, seed: u64) -> AudioClip {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let rate = CORPUS_SAMPLE_RATE as f64;
    let samples = (0..len)
        .map(|t| (0.4 * (2.0 * std::f64::consts::PI * hz * t as f64 / rate).sin() + rng.random_range(-0.02..0.02)) as f32)
        .collect();
    AudioClip::new(samples, CORPUS_SAMPLE_RATE)
}

/// `n` training utterances of one second each plus one test record
/// without audio. Returns the manifest path.
pub fn corpus(dir: &Path, n: usize) -> PathBuf {
    let mut manifest = String::new();
    for i in 0..n {
        save_wav(&tone(22_050, 180.0 + 60.0 * i as f64, i as u64), dir.join(format!("u{i}.wav"))).unwrap();
        manifest.push_str(&format!("u{i}\ttrain\tnews\tu{i}.wav\tsentence {i}\n"));
    }
    manifest.push_str("t0\ttest\tnews\t\ta test sentence\n");
    let path = dir.join("manifest.tsv");
    fs::write(&path, manifest).unwrap();
    path
}

pub fn tiny_config_file(dir: &Path) -> PathBuf {
    let path = dir.join("tiny.cfg");
    fs::write(&path, TINY_CONFIG).unwrap();
    path
}

pub fn tiny_run_config() -> RunConfig {
    RunConfig::from_text(TINY_CONFIG).unwrap()
}

/// A perturbed, untrained checkpoint of the tiny configuration.
pub fn random_checkpoint(dir: &Path, name: &str, seed: u64) -> PathBuf {
    let config = tiny_run_config();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut model = FlowModel::<f32>::new(config.flow, &mut rng).unwrap();
    model.perturb(0.5, &mut rng);
    let path = dir.join(name);
    Checkpoint::fresh(config, model).save(&path).unwrap();
    path
}

/// The first 1×1 convolution gets a row shrunk by 1e-6. It stays
/// invertible but inverting it in 32-bit arithmetic loses the roundtrip.
pub fn ill_conditioned_checkpoint(dir: &Path) -> PathBuf {
    let path = random_checkpoint(dir, "ill.kwg", 9);
    let mut ck = Checkpoint::load(&path).unwrap();
    let w = &mut ck.model.steps_mut()[0].invconv;
    let cols = w.dims2().1;
    for v in &mut w.data_mut()[..cols] {
        *v *= 1e-6;
    }
    ck.save(&path).unwrap();
    path
}

pub const MODELS: [&str; 4] = ["genuine", "hifigan-en", "waveglow-en", "waveglow-ckb"];

/// Published per-category MOS, one column per entry of [`MODELS`].
pub const PUBLISHED: [(&str, [&str; 4]); 17] = [
    ("News", ["5.0", "4.2", "4.5", "4.92"]),
    ("Sports", ["4.9", "4.1", "4.4", "4.75"]),
    ("Linguistics", ["4.8", "4.0", "4.3", "4.93"]),
    ("Psychology", ["5.0", "4.3", "4.6", "4.97"]),
    ("Poem", ["4.9", "4.2", "4.5", "4.83"]),
    ("Health", ["4.8", "4.1", "4.4", "4.99"]),
    ("Questions", ["5.0", "4.2", "4.5", "4.96"]),
    ("Exclamation", ["5.0", "4.2", "4.5", "4.96"]),
    ("Science", ["4.9", "4.1", "4.4", "5.00"]),
    ("Miscellaneous", ["4.8", "4.0", "4.3", "4.94"]),
    ("General Info", ["4.9", "4.2", "4.5", "4.92"]),
    ("Interviews", ["4.9", "4.2", "4.5", "4.88"]),
    ("Politics", ["5.0", "4.3", "4.6", "4.78"]),
    ("Education & Lit", ["4.8", "4.0", "4.3", "4.93"]),
    ("Story", ["4.9", "4.2", "4.5", "4.75"]),
    ("Tourism", ["4.9", "4.2", "4.5", "5.00"]),
    ("SMS", ["4.8", "4.0", "4.3", "4.91"]),
];

/// Ratings CSV realising the published column of `model` (an index into
/// [`MODELS`]): 100 ratings per category, `k` fives and the rest fours,
/// so each mean is exactly `4 + k/100`.
pub fn published_csv(model: usize) -> String {
    let mut out = String::from("rater_id,sample_id,category,model_id,score,timestamp\n");
    for (cat, values) in PUBLISHED {
        let (whole, frac) = values[model].split_once('.').unwrap();
        let k = (whole.parse::<usize>().unwrap() - 4) * 100 + format!("{frac:0<2}").parse::<usize>().unwrap();
        for i in 0..100 {
            let score = if i < k { 5 } else { 4 };
            out.push_str(&format!("r{:02},\"{cat}-{i:03}\",\"{cat}\",{},{score},{}\n", i % 12, MODELS[model], 1_700_000_000 + i));
        }
    }
    out
}
