use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use dfaforge::{Dfa, LabeledDataset, SecondOrderRnn};

fn dfaforge(args: &[&str], out_root: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_dfaforge"))
        .args(args)
        .env("DFAFORGE_OUT", out_root)
        .output()
        .expect("binary runs")
}

fn ok(args: &[&str], out_root: &Path) -> String {
    let out = dfaforge(args, out_root);
    assert!(
        out.status.success(),
        "{args:?} failed: {}",
        String::from_utf8_lossy(&out.stderr)
    );
    String::from_utf8(out.stdout).unwrap()
}

/// The run directory is the last line a command prints.
fn last_line(stdout: &str) -> PathBuf {
    PathBuf::from(stdout.lines().last().unwrap())
}

fn csv_files(dir: &Path) -> Vec<(String, Vec<u8>)> {
    let mut files: Vec<_> = fs::read_dir(dir)
        .unwrap()
        .map(|e| e.unwrap().path())
        .filter(|p| p.extension().is_some_and(|x| x == "csv"))
        .map(|p| (p.file_name().unwrap().to_string_lossy().into_owned(), fs::read(&p).unwrap()))
        .collect();
    files.sort();
    files
}

#[test]
fn generate_grammar_one() {
    let tmp = tempfile::tempdir().unwrap();
    let a = tmp.path().join("a");
    let b = tmp.path().join("b");
    for dir in [&a, &b] {
        ok(&["generate", "-g", "1", "--seed", "3", "--out", dir.to_str().unwrap()], tmp.path());
    }
    let train = LabeledDataset::load(&a.join("train.tsv")).unwrap();
    let test = LabeledDataset::load(&a.join("test.tsv")).unwrap();
    assert_eq!(train.positives() + test.positives(), 13);
    assert_eq!(train.len() + test.len(), (3..=15).map(|l| 1usize << l).sum::<usize>());
    for file in ["train.tsv", "test.tsv"] {
        assert_eq!(fs::read(a.join(file)).unwrap(), fs::read(b.join(file)).unwrap(), "{file}");
    }
    let echo = |dir: &Path| {
        let mut v: serde_json::Value = serde_json::from_str(&fs::read_to_string(dir.join("run.json")).unwrap()).unwrap();
        v.as_object_mut().unwrap().remove("out");
        v
    };
    assert_eq!(echo(&a), echo(&b));
    let labelled_one = fs::read_to_string(a.join("train.tsv"))
        .unwrap()
        .lines()
        .chain(fs::read_to_string(a.join("test.tsv")).unwrap().lines())
        .filter(|l| l.starts_with("1\t"))
        .count();
    assert_eq!(labelled_one, 13);
}

#[test]
fn generate_long_parity_set_is_balanced() {
    let tmp = tempfile::tempdir().unwrap();
    let out = ok(
        &["generate", "-g", "5", "--long-count", "10000", "--max-len", "6"],
        tmp.path(),
    );
    let dir = last_line(&out);
    assert!(dir.starts_with(tmp.path()), "DFAFORGE_OUT is the default root");
    let long = LabeledDataset::load(&dir.join("long200.tsv")).unwrap();
    assert_eq!(long.len(), 10_000);
    assert_eq!(long.positives(), 5_000);
}

#[test]
fn train_extract_evaluate_round_trip() {
    let tmp = tempfile::tempdir().unwrap();
    let model_dir = tmp.path().join("model");
    let stdout = ok(
        &[
            "train", "-g", "4", "--max-len", "8", "--hidden", "4", "--epochs", "3", "--no-early-stop",
            "--out", model_dir.to_str().unwrap(),
        ],
        tmp.path(),
    );
    assert!(stdout.starts_with("epochs 3 "));
    let loss = fs::read_to_string(model_dir.join("loss.csv")).unwrap();
    assert_eq!(loss.lines().count(), 1 + 3);
    let model_path = model_dir.join("model.json");
    SecondOrderRnn::load(&model_path).unwrap();

    let ex_dir = tmp.path().join("ex");
    ok(
        &[
            "extract", "--model", model_path.to_str().unwrap(), "-g", "4", "--max-len", "8", "-k", "4",
            "--dump-clusters", "--out", ex_dir.to_str().unwrap(),
        ],
        tmp.path(),
    );
    let text = fs::read_to_string(ex_dir.join("dfa.txt")).unwrap();
    let dfa = Dfa::from_text(&text).unwrap();
    assert_eq!(dfa.to_text(), text);
    assert!(dfaforge::equivalent(&dfa, &Dfa::from_text(&text).unwrap()).equal);
    let report: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(ex_dir.join("report.json")).unwrap()).unwrap();
    assert!(report["diagnostics"].get("silhouette").is_some());
    assert!(report["diagnostics"]["unobserved_pairs"].is_u64());
    assert!(fs::read_to_string(ex_dir.join("dfa.dot")).unwrap().starts_with("digraph"));
    let clusters = fs::read_to_string(ex_dir.join("clusters.csv")).unwrap();
    assert!(clusters.starts_with("activation_index,string_id,position,cluster_id\n"));

    ok(&["generate", "-g", "4", "--max-len", "8", "--out", tmp.path().join("data").to_str().unwrap()], tmp.path());
    let test = tmp.path().join("data/test.tsv");
    let eval = ok(
        &[
            "evaluate", "--dfa", ex_dir.join("dfa.txt").to_str().unwrap(), "--data", test.to_str().unwrap(),
            "-g", "4",
        ],
        tmp.path(),
    );
    let v: serde_json::Value = serde_json::from_str(&eval).unwrap();
    assert!(v["dfa_accuracy"].as_f64().unwrap() <= 1.0);
    assert!(v["equivalent_to_grammar"].is_boolean());
    let eval = ok(
        &["evaluate", "--model", model_path.to_str().unwrap(), "--data", test.to_str().unwrap()],
        tmp.path(),
    );
    assert!(eval.contains("rnn_accuracy"));
}

#[test]
fn extract_with_one_cluster_is_a_usage_error() {
    let tmp = tempfile::tempdir().unwrap();
    let model_dir = tmp.path().join("m");
    ok(
        &["train", "-g", "1", "--max-len", "5", "--hidden", "3", "--epochs", "1", "--out", model_dir.to_str().unwrap()],
        tmp.path(),
    );
    let out = dfaforge(
        &["extract", "--model", model_dir.join("model.json").to_str().unwrap(), "-g", "1", "--max-len", "5", "-k", "1"],
        tmp.path(),
    );
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("at least two clusters"));
}

#[test]
fn divergence_exits_nonzero() {
    let tmp = tempfile::tempdir().unwrap();
    let out = dfaforge(
        &["train", "-g", "4", "--max-len", "6", "--hidden", "3", "--epochs", "2", "--lr", "1e308"],
        tmp.path(),
    );
    assert_eq!(out.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&out.stderr).contains("non-finite"));
}

#[test]
fn grammar_three_default_training_converges() {
    let tmp = tempfile::tempdir().unwrap();
    let out = ok(&["train", "-g", "3"], tmp.path());
    assert!(out.contains("test_accuracy 1 converged true"), "{out}");
}

#[test]
fn usage_errors() {
    let tmp = tempfile::tempdir().unwrap();
    let out = dfaforge(&["sweep", "warp-drive", "-g", "1"], tmp.path());
    assert_eq!(out.status.code(), Some(2));
    let err = String::from_utf8_lossy(&out.stderr);
    for name in ["capacity", "training-time", "random-init", "long-string"] {
        assert!(err.contains(name), "{err}");
    }
    assert_eq!(dfaforge(&["generate", "-g", "9"], tmp.path()).status.code(), Some(2));
    assert_eq!(dfaforge(&["frobnicate"], tmp.path()).status.code(), Some(2));
    assert_eq!(dfaforge(&["train"], tmp.path()).status.code(), Some(2));
}

#[test]
fn config_file_with_flag_override() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = tmp.path().join("cfg.json");
    fs::write(&cfg, r#"{"grammar": 2, "max_len": 6, "seed": 5}"#).unwrap();
    let dir = tmp.path().join("g");
    ok(
        &["generate", "--config", cfg.to_str().unwrap(), "--max-len", "7", "--out", dir.to_str().unwrap()],
        tmp.path(),
    );
    let test = LabeledDataset::load(&dir.join("test.tsv")).unwrap();
    assert_eq!(test.grammar.get(), 2);
    assert_eq!(test.max_len, 7);
    let echoed: serde_json::Value = serde_json::from_str(&fs::read_to_string(dir.join("run.json")).unwrap()).unwrap();
    assert_eq!(echoed["seed"], 5);
    assert_eq!(echoed["max_len"], 7);

    fs::write(&cfg, r#"{"grammer": 2}"#).unwrap();
    let out = dfaforge(&["generate", "--config", cfg.to_str().unwrap()], tmp.path());
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn sweep_reruns_are_byte_identical() {
    let tmp = tempfile::tempdir().unwrap();
    let args = [
        "sweep", "random-init", "-g", "4", "--max-len", "7", "--hidden", "4", "--epochs", "2", "--n-inits", "2",
        "--k-range", "2..3", "--jobs", "2",
    ];
    let first = last_line(&ok(&args, tmp.path()));
    let snapshot = csv_files(&first);
    assert_eq!(snapshot.len(), 4);
    let extraction = &snapshot.iter().find(|(n, _)| n == "extraction.csv").unwrap().1;
    assert_eq!(extraction.iter().filter(|&&b| b == b'\n').count(), 1 + 2 * 2);

    let again = tmp.path().join("again");
    let manifest = first.join("manifest.json");
    let second = last_line(&ok(
        &[
            "sweep", "random-init", "--config", manifest.to_str().unwrap(), "--jobs", "1", "--out",
            again.to_str().unwrap(),
        ],
        tmp.path(),
    ));
    assert_eq!(second.file_name(), first.file_name());
    assert_eq!(csv_files(&second), snapshot);
}

#[test]
fn random_init_defaults_give_130_cells() {
    let tmp = tempfile::tempdir().unwrap();
    let dir = last_line(&ok(&["sweep", "random-init", "-g", "1"], tmp.path()));
    let extraction = fs::read_to_string(dir.join("extraction.csv")).unwrap();
    assert_eq!(extraction.lines().count(), 1 + 130);
}

#[test]
fn dot_output() {
    let tmp = tempfile::tempdir().unwrap();
    let out = ok(&["dot", "-g", "3"], tmp.path());
    assert!(out.starts_with("digraph dfa {"));
    assert_eq!(out.matches("shape=doublecircle").count(), 3);
}
