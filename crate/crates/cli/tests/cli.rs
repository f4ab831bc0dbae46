mod common;

use std::fs;
use std::io::{BufRead, BufReader, Read, Write};
use std::net::{TcpListener, TcpStream};
use std::process::{Command, Stdio};

use common::*;
use kwglow::dsp::{load_wav, mel_spectrogram, read_mel, save_wav, write_mel, AudioClip, MelSpectrogram};
use kwglow::training::{read_metrics, RunConfig};

#[test]
fn every_subcommand_documents_its_flags() {
    let flags: [(&str, &[&str]); 6] = [
        ("preprocess", &["--manifest", "--out-dir", "--normalizer", "--json"]),
        ("train", &["--manifest", "--out-dir", "--config", "--resume", "--iterations"]),
        ("synthesize", &["--checkpoint", "--mel", "--wav", "--out", "--sigma", "--seed"]),
        ("check", &["--checkpoint", "--config", "--mode", "--draws", "--probes", "--seed", "--json"]),
        ("mos", &["--ratings", "--compare", "--json"]),
        ("serve", &["--samples", "--port", "--out", "--host", "--seed"]),
    ];
    for (cmd, expected) in flags {
        let out = kwglow(&[cmd, "--help"]);
        assert_eq!(code(&out), 0, "{cmd}");
        let text = stdout(&out);
        for flag in expected {
            assert!(text.contains(flag), "{cmd} --help lacks {flag}");
        }
    }
    assert_eq!(code(&kwglow(&["--help"])), 0);
}

#[test]
fn usage_errors_exit_one() {
    assert_eq!(code(&kwglow(&[])), 1);
    assert_eq!(code(&kwglow(&["transmogrify"])), 1);
    assert_eq!(code(&kwglow(&["mos", "--ratings", "x.csv", "--frobnicate"])), 1);
    assert_eq!(code(&kwglow(&["train", "--manifest", "m.tsv"])), 1);
    assert_eq!(code(&kwglow(&["check", "--mode", "roundtrip"])), 1);
    assert_eq!(code(&kwglow(&["check", "--config", "a", "--checkpoint", "b"])), 1);
    assert_eq!(code(&kwglow(&["check", "--config", "a", "--mode", "sideways"])), 1);
    assert_eq!(code(&kwglow(&["serve", "--samples", ".", "--port", "99999", "--out", "r.csv"])), 1);
}

#[test]
fn preprocess_writes_one_feature_file_per_training_utterance() {
    let dir = tempfile::tempdir().unwrap();
    let manifest = corpus(dir.path(), 3);
    let feats = dir.path().join("feats");
    let json = dir.path().join("audit.json");
    let out = kwglow(&["preprocess", "--manifest", s(&manifest), "--out-dir", s(&feats), "--json", s(&json)]);
    assert_eq!(code(&out), 0, "{}", String::from_utf8_lossy(&out.stderr));
    assert!(stdout(&out).contains("audited\t3\n"));
    assert!(stdout(&out).contains("skipped\tt0\n"));
    assert!(fs::read_to_string(&json).unwrap().contains("\"audited\": 3"));

    let mut kmel: Vec<_> = fs::read_dir(&feats)
        .unwrap()
        .map(|e| e.unwrap().path())
        .filter(|p| p.extension().is_some_and(|e| e == "kmel"))
        .collect();
    kmel.sort();
    assert_eq!(kmel.len(), 3);
    for (i, path) in kmel.iter().enumerate() {
        let mel = read_mel(path).unwrap();
        assert_eq!(mel.n_mels, 80);
        let clip = load_wav(dir.path().join(format!("u{i}.wav"))).unwrap();
        let direct = mel_spectrogram(&clip, &Default::default(), &Default::default()).unwrap();
        assert_eq!(mel.values, direct.values);
    }

    let before: Vec<Vec<u8>> = kmel.iter().map(|p| fs::read(p).unwrap()).collect();
    assert_eq!(code(&kwglow(&["preprocess", "--manifest", s(&manifest), "--out-dir", s(&feats)])), 0);
    let after: Vec<Vec<u8>> = kmel.iter().map(|p| fs::read(p).unwrap()).collect();
    assert_eq!(before, after);
}

#[test]
fn preprocess_data_errors_exit_two() {
    let dir = tempfile::tempdir().unwrap();
    let manifest = corpus(dir.path(), 3);
    fs::remove_file(dir.path().join("u1.wav")).unwrap();
    let out = kwglow(&["preprocess", "--manifest", s(&manifest), "--out-dir", s(&dir.path().join("f"))]);
    assert_eq!(code(&out), 2);
    assert!(stdout(&out).contains("missing\tu1\t"), "{}", stdout(&out));

    let leak = dir.path().join("leak.tsv");
    fs::write(&leak, "a\ttrain\tnews\tu0.wav\tsame text\nb\ttest\tnews\t\tsame text\n").unwrap();
    assert_eq!(code(&kwglow(&["preprocess", "--manifest", s(&leak), "--out-dir", s(&dir.path().join("g"))])), 2);
    assert_eq!(code(&kwglow(&["preprocess", "--manifest", "/nonexistent.tsv", "--out-dir", s(dir.path())])), 2);

    let normalizer = ["preprocess", "--manifest", s(&leak), "--out-dir", s(dir.path()), "--normalizer", "rot13"];
    assert_eq!(code(&kwglow(&normalizer)), 1);
}

#[test]
fn train_echoes_the_default_configuration() {
    let dir = tempfile::tempdir().unwrap();
    let out = kwglow(&["train", "--manifest", "/nonexistent.tsv", "--out-dir", s(dir.path())]);
    assert_eq!(code(&out), 2);
    let text = stdout(&out);
    for line in ["train.batch_size = 22\n", "train.learning_rate = 0.0001\n", "train.seed = 1234\n"] {
        assert!(text.contains(line), "{line}");
    }
    assert!(text.contains("# batch 22 lr 1e-4 seed 1234\n"));
    let echoed: String = text.lines().filter(|l| !l.starts_with('#')).map(|l| format!("{l}\n")).collect();
    assert_eq!(RunConfig::from_text(&echoed).unwrap(), RunConfig::default());
}

#[test]
fn train_is_deterministic_and_resumable() {
    let dir = tempfile::tempdir().unwrap();
    let manifest = corpus(dir.path(), 4);
    let config = tiny_config_file(dir.path());
    let run = |name: &str, extra: &[&str]| {
        let out_dir = dir.path().join(name);
        let mut args = vec!["train", "--manifest", s(&manifest), "--out-dir", s(&out_dir), "--config", s(&config)];
        args.extend_from_slice(extra);
        let out = kwglow(&args);
        assert_eq!(code(&out), 0, "{}", String::from_utf8_lossy(&out.stderr));
        out_dir
    };
    let a = run("a", &["--iterations", "10"]);
    let b = run("b", &["--iterations", "10"]);
    let metrics_a = fs::read(a.join("metrics.tsv")).unwrap();
    assert_eq!(metrics_a, fs::read(b.join("metrics.tsv")).unwrap());
    assert_eq!(read_metrics(a.join("metrics.tsv")).unwrap().len(), 10);
    assert_eq!(fs::read(a.join("checkpoint_00000010.kwg")).unwrap(), fs::read(b.join("checkpoint_00000010.kwg")).unwrap());

    // Stop at 5, resume to 10 without repeating --config.
    let c = run("c", &["--iterations", "5"]);
    let ck = c.join("checkpoint_00000005.kwg");
    let out = kwglow(&["train", "--manifest", s(&manifest), "--out-dir", s(&c), "--resume", s(&ck), "--iterations", "10"]);
    assert_eq!(code(&out), 0);
    assert_eq!(fs::read(c.join("metrics.tsv")).unwrap(), metrics_a);
}

#[test]
fn train_failures_map_to_exit_codes() {
    let dir = tempfile::tempdir().unwrap();
    let manifest = corpus(dir.path(), 2);
    let out_dir = s(dir.path()).to_string() + "/run";
    let bad_key = dir.path().join("bad.cfg");
    fs::write(&bad_key, "train.batch_sizes = 4\n").unwrap();
    assert_eq!(code(&kwglow(&["train", "--manifest", s(&manifest), "--out-dir", &out_dir, "--config", s(&bad_key)])), 2);

    let corrupt = dir.path().join("corrupt.kwg");
    fs::write(&corrupt, b"KWGLOW1 and then nonsense").unwrap();
    assert_eq!(code(&kwglow(&["train", "--manifest", s(&manifest), "--out-dir", &out_dir, "--resume", s(&corrupt)])), 2);

    // A vanishing training sigma makes every loss overflow.
    let blowup = dir.path().join("blowup.cfg");
    fs::write(&blowup, format!("{TINY_CONFIG}train.sigma = 1e-300\n")).unwrap();
    let out = kwglow(&["train", "--manifest", s(&manifest), "--out-dir", &out_dir, "--config", s(&blowup), "--iterations", "20"]);
    assert_eq!(code(&out), 3, "{}", String::from_utf8_lossy(&out.stderr));
    assert!(String::from_utf8_lossy(&out.stderr).contains("consecutive non-finite"));
}

#[test]
fn synthesize_contract() {
    let dir = tempfile::tempdir().unwrap();
    let ck = random_checkpoint(dir.path(), "model.kwg", 1);
    let input = dir.path().join("in.wav");
    save_wav(&tone(5001, 300.0, 2), &input).unwrap();
    let synth = |out: &str, extra: &[&str]| {
        let path = dir.path().join(out);
        let mut args = vec!["synthesize", "--checkpoint", s(&ck), "--out", s(&path)];
        args.extend_from_slice(extra);
        (kwglow(&args), path)
    };

    let (out, a) = synth("a.wav", &["--wav", s(&input), "--seed", "7"]);
    assert_eq!(code(&out), 0, "{}", String::from_utf8_lossy(&out.stderr));
    assert_eq!(load_wav(&a).unwrap().len(), 5000);
    let (_, b) = synth("b.wav", &["--wav", s(&input), "--seed", "7"]);
    assert_eq!(fs::read(&a).unwrap(), fs::read(&b).unwrap());
    let (_, c) = synth("c.wav", &["--wav", s(&input), "--seed", "8"]);
    assert_ne!(fs::read(&a).unwrap(), fs::read(&c).unwrap());

    let mel = dir.path().join("in.kmel");
    write_mel(&mel_spectrogram(&load_wav(&input).unwrap(), &Default::default(), &Default::default()).unwrap(), &mel).unwrap();
    let (out, m) = synth("m.wav", &["--mel", s(&mel)]);
    assert_eq!(code(&out), 0);
    // Feature files do not carry the clip length: every frame's hop is covered.
    assert_eq!(load_wav(&m).unwrap().len(), 20 * 256);

    assert_eq!(code(&synth("x.wav", &["--wav", s(&input), "--sigma", "0"]).0), 1);
    assert_eq!(code(&synth("x.wav", &["--wav", s(&input), "--sigma", "-1"]).0), 1);
    assert_eq!(code(&synth("x.wav", &["--wav", s(&input), "--mel", s(&mel)]).0), 1);

    let narrow = dir.path().join("narrow.kmel");
    let forty = MelSpectrogram { n_mels: 40, n_frames: 8, values: vec![0.0; 320], hop_length: 256, sample_rate: 22_050, n_samples: None };
    write_mel(&forty, &narrow).unwrap();
    assert_eq!(code(&synth("x.wav", &["--mel", s(&narrow)]).0), 2);

    let slow = dir.path().join("slow.wav");
    save_wav(&AudioClip::new(vec![0.1; 4000], 16_000), &slow).unwrap();
    assert_eq!(code(&synth("x.wav", &["--wav", s(&slow)]).0), 2);

    let corrupt = dir.path().join("corrupt.kwg");
    let bytes = fs::read(&ck).unwrap();
    fs::write(&corrupt, &bytes[..bytes.len() / 2]).unwrap();
    let out = kwglow(&["synthesize", "--checkpoint", s(&corrupt), "--wav", s(&input), "--out", s(&dir.path().join("x.wav"))]);
    assert_eq!(code(&out), 2);
    assert!(!dir.path().join("x.wav").exists());
}

#[test]
fn check_contract() {
    let dir = tempfile::tempdir().unwrap();
    let config = tiny_config_file(dir.path());
    let json = dir.path().join("check.json");
    let out = kwglow(&["check", "--config", s(&config), "--json", s(&json)]);
    assert_eq!(code(&out), 0, "{}", stdout(&out));
    let text = stdout(&out);
    for mode in ["roundtrip", "jacobian", "grad"] {
        assert!(text.lines().any(|l| l.starts_with(mode) && l.contains(" ok ")), "{mode}: {text}");
    }
    let reports: serde_json::Value = serde_json::from_str(&fs::read_to_string(&json).unwrap()).unwrap();
    assert_eq!(reports.as_array().unwrap().len(), 3);
    assert!(reports.as_array().unwrap().iter().all(|r| r["passed"] == true));

    let ck = random_checkpoint(dir.path(), "trained.kwg", 3);
    for mode in ["roundtrip", "jacobian", "grad"] {
        assert_eq!(code(&kwglow(&["check", "--checkpoint", s(&ck), "--mode", mode])), 0, "{mode}");
    }

    let ill = ill_conditioned_checkpoint(dir.path());
    let out = kwglow(&["check", "--checkpoint", s(&ill), "--mode", "roundtrip"]);
    assert_eq!(code(&out), 3, "{}", stdout(&out));
    assert!(stdout(&out).contains("FAILED"));

    let corrupt = dir.path().join("corrupt.kwg");
    let mut bytes = fs::read(&ck).unwrap();
    bytes.truncate(bytes.len() - 3);
    fs::write(&corrupt, bytes).unwrap();
    assert_eq!(code(&kwglow(&["check", "--checkpoint", s(&corrupt)])), 2);
    assert_eq!(code(&kwglow(&["check", "--checkpoint", s(&dir.path().join("absent.kwg"))])), 2);
    let bad = dir.path().join("bad.cfg");
    fs::write(&bad, "flow.group_size = 7\n").unwrap();
    assert_eq!(code(&kwglow(&["check", "--config", s(&bad)])), 2);
}

#[test]
fn mos_contract() {
    let dir = tempfile::tempdir().unwrap();
    let ours = dir.path().join("ours.csv");
    fs::write(&ours, published_csv(3)).unwrap();
    let json = dir.path().join("mos.json");
    let out = kwglow(&["mos", "--ratings", s(&ours), "--json", s(&json)]);
    assert_eq!(code(&out), 0);
    let text = stdout(&out);
    assert!(text.contains("overall (mean of categories)\t4.91\n"), "{text}");
    assert!(text.contains("Science\t5.00\t100\n"));
    let value: serde_json::Value = serde_json::from_str(&fs::read_to_string(&json).unwrap()).unwrap();
    assert!((value["reports"][0]["overall_mean_of_categories"].as_f64().unwrap() - 83.42 / 17.0).abs() < 1e-9);
    assert!(value["comparison"].is_null());

    let base = dir.path().join("en.csv");
    fs::write(&base, published_csv(2)).unwrap();
    let out = kwglow(&["mos", "--ratings", s(&ours), "--compare", s(&base)]);
    assert_eq!(code(&out), 0);
    let text = stdout(&out);
    let table: Vec<&str> = text.lines().skip_while(|l| !l.starts_with("category\twaveglow-ckb")).collect();
    assert_eq!(table.len(), 1 + 17 + 2, "{text}");
    assert_eq!(table[0], "category\twaveglow-ckb\twaveglow-en");
    assert!(table.contains(&"Science\t5.00\t4.40"));
    assert!(table.contains(&"overall (mean of categories)\t4.91\t4.45"));

    let header_only = dir.path().join("empty.csv");
    fs::write(&header_only, "rater_id,sample_id,category,model_id,score,timestamp\n").unwrap();
    assert_eq!(code(&kwglow(&["mos", "--ratings", s(&header_only)])), 2);
    let blank = dir.path().join("blank.csv");
    fs::write(&blank, "").unwrap();
    assert_eq!(code(&kwglow(&["mos", "--ratings", s(&blank)])), 2);
    let six = dir.path().join("six.csv");
    fs::write(&six, "rater_id,sample_id,category,model_id,score,timestamp\nr,s,c,m,6,0\n").unwrap();
    assert_eq!(code(&kwglow(&["mos", "--ratings", s(&six)])), 2);
    assert_eq!(code(&kwglow(&["mos", "--ratings", s(&dir.path().join("absent.csv"))])), 2);
}

fn http_get(addr: &str, path: &str) -> (u16, String) {
    let mut stream = TcpStream::connect(addr).unwrap();
    write!(stream, "GET {path} HTTP/1.1\r\nHost: {addr}\r\nConnection: close\r\n\r\n").unwrap();
    let mut reply = String::new();
    stream.read_to_string(&mut reply).unwrap();
    let status = reply[9..12].parse().unwrap();
    let body = reply.split_once("\r\n\r\n").map(|(_, b)| b.to_string()).unwrap_or_default();
    (status, body)
}

fn sample_store(dir: &std::path::Path) {
    let mut tsv = String::new();
    for i in 0..3 {
        save_wav(&tone(2205, 400.0, i), dir.join(format!("s{i}.wav"))).unwrap();
        tsv.push_str(&format!("s{i}\tNews\tmodel-a\ts{i}.wav\n"));
    }
    fs::write(dir.join("samples.tsv"), tsv).unwrap();
}

#[test]
fn serve_answers_reports_and_stops_on_sigterm() {
    let dir = tempfile::tempdir().unwrap();
    sample_store(dir.path());
    let ratings = dir.path().join("ratings.csv");
    let mut child = Command::new(env!("CARGO_BIN_EXE_kwglow"))
        .args(["serve", "--samples", s(dir.path()), "--port", "0", "--out", s(&ratings)])
        .stdout(Stdio::piped())
        .spawn()
        .unwrap();
    let mut lines = BufReader::new(child.stdout.take().unwrap()).lines();
    let banner = lines.next().unwrap().unwrap();
    let addr = banner.rsplit("http://").next().unwrap().to_string();

    let (status, body) = http_get(&addr, "/api/report");
    assert_eq!(status, 200);
    let reports: serde_json::Value = serde_json::from_str(&body).unwrap();
    assert_eq!(reports[0]["model_id"], "model-a");
    assert!(reports[0]["per_category"].as_object().unwrap().is_empty());
    assert_eq!(http_get(&addr, "/api/session/rater1/next").0, 200);

    let killed = Command::new("kill").args(["-TERM", &child.id().to_string()]).status().unwrap();
    assert!(killed.success());
    assert_eq!(child.wait().unwrap().code(), Some(0));
    assert!(lines.any(|l| l.unwrap().starts_with("stopped")));
    assert_eq!(fs::read_to_string(&ratings).unwrap(), "rater_id,sample_id,category,model_id,score,timestamp\n");
}

#[test]
fn serve_failures_map_to_exit_codes() {
    let dir = tempfile::tempdir().unwrap();
    sample_store(dir.path());
    let ratings = s(&dir.path().join("ratings.csv")).to_string();
    let taken = TcpListener::bind("127.0.0.1:0").unwrap();
    let port = taken.local_addr().unwrap().port().to_string();
    assert_eq!(code(&kwglow(&["serve", "--samples", s(dir.path()), "--port", &port, "--out", &ratings])), 3);

    let empty = tempfile::tempdir().unwrap();
    assert_eq!(code(&kwglow(&["serve", "--samples", s(empty.path()), "--port", "0", "--out", &ratings])), 2);
    fs::write(dir.path().join("samples.tsv"), "s0\tNews\tmodel-a\tmissing.wav\n").unwrap();
    assert_eq!(code(&kwglow(&["serve", "--samples", s(dir.path()), "--port", "0", "--out", &ratings])), 2);
}
