//! End-to-end tests of the `seasonmatch` binary.

use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use seasonmatch::artifact::{read_manifest, sha256_file};
use seasonmatch::dataset::Partition;
use seasonmatch::report::load_fc_matrix;

const CHAIN: [&str; 8] = ["synth", "preprocess", "partition", "mine", "train", "embed", "evaluate", "report"];

fn small_config(dir: &Path, extra: &str) -> PathBuf {
    let cfg = dir.join("run.cfg");
    fs::write(
        &cfg,
        format!(
            "run.out_dir = {}\nseed = 1\nsynth.n_places = 100\nsynth.n_conditions = 2\n\
             partition.test_segments = 10:30,60:80\npartition.buffer = 3\n\
             mine.n_triplets = 500\nmine.n_pairs = 400\ntrain.epochs = 2\ntrain.lr = 1.0\n{extra}",
            dir.join("out").display()
        ),
    )
    .unwrap();
    cfg
}

fn run(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_seasonmatch"))
        .args(args)
        .env_remove("SEASONMATCH_THREADS")
        .env("RUST_LOG", "warn")
        .output()
        .unwrap()
}

fn stage(name: &str, cfg: &Path, extra: &[&str]) -> Output {
    let mut args = vec![name, "--config", cfg.to_str().unwrap()];
    args.extend_from_slice(extra);
    run(&args)
}

fn run_chain(cfg: &Path, stages: &[&str]) {
    for s in stages {
        let out = stage(s, cfg, &[]);
        assert!(out.status.success(), "{s}: {}", String::from_utf8_lossy(&out.stderr));
    }
}

#[test]
fn two_condition_chain_gives_two_entry_matrix() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = small_config(dir.path(), "");
    run_chain(&cfg, &CHAIN);
    let out = dir.path().join("out");
    let fc = load_fc_matrix(&out.join("report/fc_matrix.csv")).unwrap();
    assert_eq!(fc.len(), 2);
    assert!(fc.contains_key(&("summer".to_string(), "fall".to_string())));
    for name in ["fc_table.txt", "fc_bars_summer.png", "fc_bars_fall.png", "pr_curves.png", "pr_summer_fall.csv"] {
        assert!(out.join("report").join(name).exists(), "missing {name}");
    }
    for s in CHAIN {
        assert!(out.join(format!("{s}.manifest")).exists());
    }
    // no stage rewrote anything an earlier stage produced
    for s in CHAIN {
        for (path, sum) in read_manifest(&out.join(format!("{s}.manifest"))).unwrap() {
            assert_eq!(sha256_file(&out.join(&path)).unwrap(), sum, "{path} changed after {s}");
        }
    }
    assert!(fs::read_dir(&out).unwrap().all(|e| !e.unwrap().file_name().to_string_lossy().ends_with(".tmp")));
}

#[test]
fn evaluate_without_embed_names_embed() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = small_config(dir.path(), "");
    run_chain(&cfg, &["synth", "preprocess", "partition"]);
    let out = stage("evaluate", &cfg, &[]);
    assert_eq!(out.status.code(), Some(2));
    let err = String::from_utf8_lossy(&out.stderr);
    assert!(err.contains("`embed`"), "{err}");
    assert_eq!(err.trim().lines().count(), 1);
}

#[test]
fn missing_upstream_names_each_producer() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = small_config(dir.path(), "");
    for (s, producer) in [("preprocess", "synth"), ("partition", "preprocess"), ("report", "evaluate")] {
        let out = stage(s, &cfg, &[]);
        assert_eq!(out.status.code(), Some(2), "{s}");
        assert!(String::from_utf8_lossy(&out.stderr).contains(&format!("`{producer}`")), "{s}");
    }
}

#[test]
fn flags_override_the_file() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = small_config(dir.path(), "");
    run_chain(&cfg, &["synth", "preprocess"]);
    let out = stage("partition", &cfg, &["--buffer", "6", "--test-segments", "40:60"]);
    assert!(out.status.success());
    let text = fs::read_to_string(dir.path().join("out/partition.txt")).unwrap();
    let p = Partition::from_text(&text, 100).unwrap();
    assert_eq!(p.buffer, 6);
    assert_eq!(p.n_test(), 20);
    let out = stage("partition", &cfg, &["--set", "partition.buffer=2"]);
    assert!(out.status.success());
    let text = fs::read_to_string(dir.path().join("out/partition.txt")).unwrap();
    assert_eq!(Partition::from_text(&text, 100).unwrap().buffer, 2);
}

#[test]
fn usage_errors_exit_one() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = small_config(dir.path(), "");
    assert_eq!(run(&["nonsense"]).status.code(), Some(1));
    assert_eq!(stage("synth", &cfg, &["--no-such-flag"]).status.code(), Some(1));
    assert_eq!(stage("synth", &cfg, &["--set", "nope=1"]).status.code(), Some(1));
    assert_eq!(stage("synth", &cfg, &["--epochs", "zero"]).status.code(), Some(1));
    assert_eq!(run(&["synth", "--config", "/does/not/exist.cfg"]).status.code(), Some(1));
    assert_eq!(run(&["--help"]).status.code(), Some(0));
}

#[test]
fn contrastive_chain_and_loss_mismatch() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = small_config(dir.path(), "train.loss = contrastive\n");
    run_chain(&cfg, &["synth", "preprocess", "partition", "mine"]);
    let samples = fs::read_to_string(dir.path().join("out/samples.csv")).unwrap();
    assert!(samples.starts_with("anchor_traverse,"));
    assert_eq!(samples.lines().count(), 401);
    let out = stage("train", &cfg, &["--loss", "triplet"]);
    assert_eq!(out.status.code(), Some(1));
    run_chain(&cfg, &["train", "embed", "evaluate"]);
    let log = fs::read_to_string(dir.path().join("out/train_log.csv")).unwrap();
    assert_eq!(log.lines().count(), 3);
}

#[test]
fn diverging_training_exits_three() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = small_config(dir.path(), "train.loss = contrastive\n");
    run_chain(&cfg, &["synth", "preprocess", "partition", "mine"]);
    let out = stage("train", &cfg, &["--lr", "1e30"]);
    assert_eq!(out.status.code(), Some(3), "{}", String::from_utf8_lossy(&out.stderr));
    assert!(!dir.path().join("out/model.smw").exists());
}

#[test]
fn manifest_corpus_source() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = small_config(dir.path(), "");
    run_chain(&cfg, &["synth"]);
    let corpus = dir.path().join("out/corpus");
    let cfg2 = small_config(
        dir.path(),
        &format!(
            "run.out_dir = {}\ncorpus.source = manifests\ncorpus.manifests = summer={},fall={}\n",
            dir.path().join("out2").display(),
            corpus.join("summer.csv").display(),
            corpus.join("fall.csv").display()
        ),
    );
    run_chain(&cfg2, &["preprocess", "partition"]);
    let aligned = fs::read_to_string(dir.path().join("out2/aligned/seasons.txt")).unwrap();
    assert_eq!(aligned, "summer\nfall\n");
    let bad = small_config(dir.path(), "corpus.source = manifests\ncorpus.manifests = a=/nope.csv,b=/nope2.csv\n");
    assert_eq!(stage("preprocess", &bad, &[]).status.code(), Some(1));
}
