use std::fs;
use std::path::Path;
use std::process::{Command, Output};

fn qprl(dir: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_qprl")).current_dir(dir).args(args).env_remove("QPRL_SEED").output().unwrap()
}

fn ok(dir: &Path, args: &[&str]) -> String {
    let out = qprl(dir, args);
    assert!(out.status.success(), "{args:?}: {}", String::from_utf8_lossy(&out.stderr));
    String::from_utf8(out.stdout).unwrap()
}

fn lines(path: &Path) -> usize {
    fs::read_to_string(path).unwrap().lines().filter(|l| !l.trim().is_empty()).count()
}

fn small_data(dir: &Path) {
    ok(dir, &["gen-data", "--n", "4", "--train-n", "6", "--val-n", "2", "--test-n", "3", "--seed", "5"]);
}

#[test]
fn gen_data_counts_are_per_kind() {
    let dir = tempfile::tempdir().unwrap();
    small_data(dir.path());
    assert_eq!(lines(&dir.path().join("data/train.jsonl")), 18);
    assert_eq!(lines(&dir.path().join("data/val.jsonl")), 6);
    assert_eq!(lines(&dir.path().join("data/test.jsonl")), 9);

    ok(dir.path(), &["gen-data", "--kinds", "qubo", "--n", "3", "--train-n", "4", "--out", "q"]);
    let text = fs::read_to_string(dir.path().join("q/train.jsonl")).unwrap();
    assert_eq!(text.lines().count(), 4);
    assert!(text.lines().all(|l| l.contains("qubo")));
}

#[test]
fn untrained_eval_needs_no_checkpoint() {
    let dir = tempfile::tempdir().unwrap();
    small_data(dir.path());
    let summary = ok(dir.path(), &["eval", "--untrained", "--data", "data", "--max-len", "5"]);
    assert!(serde_json::from_str::<serde_json::Value>(summary.trim()).is_ok(), "{summary}");
    assert_eq!(lines(&dir.path().join("episodes.jsonl")), 9);
}

#[test]
fn short_training_run_writes_one_curve_row() {
    let dir = tempfile::tempdir().unwrap();
    small_data(dir.path());
    ok(dir.path(), &["train", "--data", "data", "--steps", "512", "--eval-every", "0"]);
    let run = dir.path().join("run");
    assert_eq!(lines(&run.join("curve.csv")), 2);
    assert!(run.join("final.ckpt").exists());
    assert!(run.join("config.json").exists());
    ok(dir.path(), &["eval", "--checkpoint", "run/final.ckpt", "--data", "data"]);
}

#[test]
fn exit_codes_separate_usage_from_runtime() {
    let dir = tempfile::tempdir().unwrap();
    assert_eq!(qprl(dir.path(), &["eval"]).status.code(), Some(1));
    assert_eq!(qprl(dir.path(), &["frobnicate"]).status.code(), Some(1));
    assert_eq!(qprl(dir.path(), &["qaoa", "--data", "data", "--bins", "1"]).status.code(), Some(1));
    assert_eq!(qprl(dir.path(), &["eval", "--untrained", "--data", "missing"]).status.code(), Some(2));
    assert_eq!(qprl(dir.path(), &["transpile", "--program", "nope.txt", "--out", "x.txt"]).status.code(), Some(2));
    assert_eq!(qprl(dir.path(), &["--help"]).status.code(), Some(0));
}

#[test]
fn worker_count_does_not_change_results() {
    let dir = tempfile::tempdir().unwrap();
    small_data(dir.path());
    ok(dir.path(), &["--workers", "1", "eval", "--untrained", "--data", "data", "--out", "one.jsonl"]);
    ok(dir.path(), &["--workers", "4", "eval", "--untrained", "--data", "data", "--out", "four.jsonl"]);
    assert_eq!(fs::read(dir.path().join("one.jsonl")).unwrap(), fs::read(dir.path().join("four.jsonl")).unwrap());
    ok(dir.path(), &["--workers", "1", "qaoa", "--data", "data", "--out", "q1.jsonl"]);
    ok(dir.path(), &["--workers", "3", "qaoa", "--data", "data", "--out", "q3.jsonl"]);
    assert_eq!(fs::read(dir.path().join("q1.jsonl")).unwrap(), fs::read(dir.path().join("q3.jsonl")).unwrap());
}

#[test]
fn help_lists_defaults() {
    let dir = tempfile::tempdir().unwrap();
    let eval = ok(dir.path(), &["eval", "--help"]);
    for d in ["[default: 10]", "[default: 25]", "[default: 0.8]"] {
        assert!(eval.contains(d), "eval help missing {d}:\n{eval}");
    }
    let qaoa = ok(dir.path(), &["qaoa", "--help"]);
    assert!(qaoa.contains("[default: 20]"));
    let train = ok(dir.path(), &["train", "--help"]);
    assert!(train.contains("[default: 512]"), "{train}");
}

#[test]
fn transpile_and_report_consume_eval_output() {
    let dir = tempfile::tempdir().unwrap();
    small_data(dir.path());
    ok(dir.path(), &["eval", "--untrained", "--data", "data"]);
    ok(dir.path(), &["qaoa", "--data", "data", "--bins", "4"]);
    ok(dir.path(), &["transpile", "--episodes", "episodes.jsonl", "--out", "native.jsonl"]);
    assert_eq!(lines(&dir.path().join("native.jsonl")), 9);
    ok(dir.path(), &["report", "--records", "episodes.jsonl", "qaoa.jsonl", "--n", "4"]);
    let scores = fs::read_to_string(dir.path().join("report/scores.csv")).unwrap();
    assert_eq!(scores.lines().count(), 1 + 18);
    assert!(dir.path().join("report/manifest.json").exists());
}

#[test]
fn sweep_presets_load() {
    let dir = tempfile::tempdir().unwrap();
    small_data(dir.path());
    let configs = Path::new(env!("CARGO_MANIFEST_DIR")).join("../../configs");
    for (name, n_steps) in [("sweep_blue", 128), ("sweep_orange", 128), ("final", 512)] {
        let conf = configs.join(format!("{name}.conf"));
        let out = ok(
            dir.path(),
            &["train", "--data", "data", "--config", conf.to_str().unwrap(), "--steps", "512", "--eval-every", "0"],
        );
        let v: serde_json::Value = serde_json::from_str(out.trim()).unwrap();
        assert_eq!(v["ppo"]["n_steps"], n_steps, "{name}");
    }
}

#[test]
fn unknown_config_key_is_usage_error() {
    let dir = tempfile::tempdir().unwrap();
    small_data(dir.path());
    fs::write(dir.path().join("bad.conf"), "warp = 9\n").unwrap();
    assert_eq!(qprl(dir.path(), &["train", "--data", "data", "--config", "bad.conf"]).status.code(), Some(1));
}
