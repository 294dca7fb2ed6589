//! End-to-end runs of the `convonet` binary on the bundled smoke corpus.

use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

fn repo(rel: &str) -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../..").join(rel)
}

fn smoke(file: &str) -> String {
    repo("data/smoke").join(file).display().to_string()
}

fn convonet(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_convonet")).args(args).env_remove("CONVONET_SEED").output().unwrap()
}

fn ok(out: &Output) -> String {
    assert!(out.status.success(), "stderr: {}", String::from_utf8_lossy(&out.stderr));
    String::from_utf8(out.stdout.clone()).unwrap()
}

fn code(out: &Output) -> i32 {
    out.status.code().unwrap()
}

fn stderr(out: &Output) -> String {
    String::from_utf8_lossy(&out.stderr).into_owned()
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

fn train_binary(out_dir: &Path, seed: &str) -> Output {
    convonet(&[
        "train", "--train-csv", &smoke("binary_train.csv"), "--embeddings", &smoke("embeddings.txt"),
        "--model", "TextConvoNet_4", "--seed", seed, "--out-dir", s(out_dir),
    ])
}

fn evaluate(out_dir: &Path, test: &str) -> Output {
    convonet(&[
        "evaluate", "--checkpoint", s(&out_dir.join("model.tcvn")), "--test-csv", &smoke(test),
        "--embeddings", &smoke("embeddings.txt"), "--out-dir", s(out_dir),
    ])
}

fn accuracy(metrics_csv: &Path) -> f64 {
    let text = fs::read_to_string(metrics_csv).unwrap();
    let mut lines = text.lines();
    let header: Vec<&str> = lines.next().unwrap().split(',').collect();
    let row: Vec<&str> = lines.next().unwrap().split(',').collect();
    row[header.iter().position(|h| *h == "accuracy").unwrap()].parse().unwrap()
}

#[test]
fn train_writes_checkpoint_and_manifest() {
    let dir = tempfile::tempdir().unwrap();
    ok(&train_binary(dir.path(), "7"));
    assert!(dir.path().join("model.tcvn").is_file());
    let manifest: serde_json::Value = serde_json::from_str(&fs::read_to_string(dir.path().join("manifest.json")).unwrap()).unwrap();
    // four pathways of 32 filters over z = 8, dense 64, one sigmoid unit
    let z = 8;
    let conv: usize = [(1, 2), (1, 3), (2, 1), (2, 2)].iter().map(|(g, h)| g * h * z * 32 + 32).sum();
    assert_eq!(manifest["param_count"].as_u64().unwrap() as usize, conv + 128 * 64 + 64 + 64 + 1);
    assert!(manifest["wall_time_seconds"].is_number());
    let epochs = fs::read_to_string(dir.path().join("epochs.csv")).unwrap();
    assert!(epochs.starts_with("epoch,train_loss,val_loss,val_accuracy\n"));
}

#[test]
fn missing_embeddings_is_a_user_error() {
    let dir = tempfile::tempdir().unwrap();
    let out = convonet(&[
        "train", "--train-csv", &smoke("binary_train.csv"), "--embeddings", "/no/such/vectors.txt", "--out-dir", s(dir.path()),
    ]);
    assert_eq!(code(&out), 2);
    assert!(stderr(&out).contains("/no/such/vectors.txt"));
    assert_eq!(stderr(&out).trim().lines().count(), 1);
}

#[test]
fn training_is_reproducible() {
    let (a, b) = (tempfile::tempdir().unwrap(), tempfile::tempdir().unwrap());
    ok(&train_binary(a.path(), "3"));
    ok(&train_binary(b.path(), "3"));
    assert_eq!(fs::read(a.path().join("epochs.csv")).unwrap(), fs::read(b.path().join("epochs.csv")).unwrap());
    assert_eq!(fs::read(a.path().join("model.tcvn")).unwrap(), fs::read(b.path().join("model.tcvn")).unwrap());
}

#[test]
fn seed_falls_back_to_environment() {
    let (a, b) = (tempfile::tempdir().unwrap(), tempfile::tempdir().unwrap());
    ok(&train_binary(a.path(), "11"));
    let out = Command::new(env!("CARGO_BIN_EXE_convonet"))
        .args([
            "train", "--train-csv", &smoke("binary_train.csv"), "--embeddings", &smoke("embeddings.txt"),
            "--model", "TextConvoNet_4", "--out-dir", s(b.path()),
        ])
        .env("CONVONET_SEED", "11")
        .output()
        .unwrap();
    ok(&out);
    assert_eq!(fs::read(a.path().join("model.tcvn")).unwrap(), fs::read(b.path().join("model.tcvn")).unwrap());
}

#[test]
fn config_file_supplies_defaults() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("run.json");
    let config = serde_json::json!({
        "train-csv": smoke("binary_train.csv"),
        "embeddings": smoke("embeddings.txt"),
        "model": "TextConvoNet_4",
        "epochs": 3,
        "seed": 2,
    });
    fs::write(&cfg, config.to_string()).unwrap();
    ok(&convonet(&["train", "--config", s(&cfg), "--epochs", "2", "--out-dir", s(dir.path())]));
    let epochs = fs::read_to_string(dir.path().join("epochs.csv")).unwrap();
    assert_eq!(epochs.lines().count(), 3, "flag overrides the file's epoch count");
}

#[test]
fn evaluate_overfits_training_data_and_is_stable() {
    let dir = tempfile::tempdir().unwrap();
    ok(&train_binary(dir.path(), "7"));
    ok(&evaluate(dir.path(), "binary_train.csv"));
    let metrics = dir.path().join("metrics.csv");
    assert!(accuracy(&metrics) >= 0.95);
    let first = (fs::read(&metrics).unwrap(), fs::read(dir.path().join("predictions.csv")).unwrap());
    ok(&evaluate(dir.path(), "binary_train.csv"));
    let second = (fs::read(&metrics).unwrap(), fs::read(dir.path().join("predictions.csv")).unwrap());
    assert_eq!(first, second);
    let header = String::from_utf8(first.0).unwrap();
    assert!(header.starts_with("dataset,model,seed,accuracy,precision,recall,f1,mcc,specificity,gmean1,gmean2\n"));
}

#[test]
fn evaluate_rejects_empty_and_mismatched_data() {
    let dir = tempfile::tempdir().unwrap();
    ok(&train_binary(dir.path(), "7"));
    let empty = dir.path().join("empty.csv");
    fs::write(&empty, "text,label\n").unwrap();
    let out = convonet(&[
        "evaluate", "--checkpoint", s(&dir.path().join("model.tcvn")), "--test-csv", s(&empty),
        "--embeddings", &smoke("embeddings.txt"), "--out-dir", s(dir.path()),
    ]);
    assert_eq!(code(&out), 2);
    assert!(stderr(&out).contains("no data rows"));

    let out = evaluate(dir.path(), "topics_test.csv");
    assert_eq!(code(&out), 2, "{}", stderr(&out));
    assert!(stderr(&out).contains("classes"));
}

#[test]
fn gridsearch_version_groups() {
    let dir = tempfile::tempdir().unwrap();
    let base = [
        "gridsearch", "--train-csv", &smoke("binary_train.csv"), "--test-csv", &smoke("binary_test.csv"),
        "--embeddings", &smoke("embeddings.txt"), "--epochs", "2", "--out-dir", s(dir.path()),
    ];
    let mut args = base.to_vec();
    args.extend(["--versions", "V1.*"]);
    ok(&convonet(&args));
    let results = fs::read_to_string(dir.path().join("results.csv")).unwrap();
    assert_eq!(results.lines().count(), 1 + 6 * 8);

    ok(&convonet(&base));
    let results = fs::read_to_string(dir.path().join("results.csv")).unwrap();
    assert_eq!(results.lines().count(), 1 + 24 * 8);
    let metrics = fs::read_to_string(dir.path().join("metrics.csv")).unwrap();
    let names: Vec<&str> = metrics.lines().skip(1).map(|l| l.split(',').nth(1).unwrap()).collect();
    assert_eq!(names.first(), Some(&"V1.1"));
    assert_eq!(names.last(), Some(&"V4.6"));

    let mut args = base.to_vec();
    args.extend(["--versions", "V9.*"]);
    let out = convonet(&args);
    assert_eq!(code(&out), 2);
    assert!(stderr(&out).contains("V4.6"));
}

fn fewshot(dir: &Path, fractions: &str, seed: &str, extra: &[&str]) -> Output {
    let mut args = vec![
        "fewshot", "--train-csv", &smoke_static("topics_train.csv"), "--test-csv", &smoke_static("topics_test.csv"),
        "--embeddings", &smoke_static("embeddings.txt"), "--fractions", fractions, "--seed", seed, "--out-dir",
        dir.to_str().unwrap(),
    ];
    args.extend_from_slice(extra);
    convonet(&args)
}

fn smoke_static(file: &str) -> &'static str {
    Box::leak(smoke(file).into_boxed_str())
}

fn fewshot_rows(dir: &Path) -> Vec<(f64, String, f64)> {
    let text = fs::read_to_string(dir.join("fewshot.csv")).unwrap();
    let mut lines = text.lines();
    assert_eq!(lines.next(), Some("fraction,model,error_rate"));
    lines
        .map(|l| {
            let f: Vec<&str> = l.split(',').collect();
            (f[0].parse().unwrap(), f[1].to_owned(), f[2].parse().unwrap())
        })
        .collect()
}

#[test]
fn fewshot_rows_per_model() {
    let dir = tempfile::tempdir().unwrap();
    ok(&fewshot(dir.path(), "0.25,0.5,1.0", "1", &["--model", "TextConvoNet_4,TextConvoNet_6", "--epochs", "3"]));
    let rows = fewshot_rows(dir.path());
    assert_eq!(rows.len(), 6);
    assert_eq!(rows.iter().filter(|r| r.1 == "TextConvoNet_4").count(), 3);
}

#[test]
fn fewshot_full_fraction_matches_plain_run() {
    let dir = tempfile::tempdir().unwrap();
    ok(&fewshot(dir.path(), "1.0", "4", &["--model", "TextConvoNet_4"]));
    let rows = fewshot_rows(dir.path());

    let plain = tempfile::tempdir().unwrap();
    ok(&convonet(&[
        "train", "--train-csv", &smoke("topics_train.csv"), "--embeddings", &smoke("embeddings.txt"),
        "--model", "TextConvoNet_4", "--seed", "4", "--out-dir", s(plain.path()),
    ]));
    ok(&evaluate(plain.path(), "topics_test.csv"));
    assert_eq!(rows[0].2, 1.0 - accuracy(&plain.path().join("metrics.csv")));
}

#[test]
fn fewshot_names_a_vanishing_class() {
    let dir = tempfile::tempdir().unwrap();
    let out = fewshot(dir.path(), "0.01", "1", &[]);
    assert_eq!(code(&out), 2);
    assert!(stderr(&out).contains("\"finance\""), "{}", stderr(&out));
}

fn mstudy(dir: &Path, fractions: &str, seed: &str, extra: &[&str]) -> Output {
    let mut args = vec![
        "mstudy", "--train-csv", smoke_static("topics_train.csv"), "--test-csv", smoke_static("topics_test.csv"),
        "--embeddings", smoke_static("embeddings.txt"), "--model", "TextConvoNet_4", "--fractions", fractions,
        "--seed", seed, "--out-dir", dir.to_str().unwrap(),
    ];
    args.extend_from_slice(extra);
    convonet(&args)
}

#[test]
fn mstudy_full_fraction_matches_plain_run() {
    let dir = tempfile::tempdir().unwrap();
    ok(&mstudy(dir.path(), "1", "6", &[]));
    let plain = tempfile::tempdir().unwrap();
    ok(&convonet(&[
        "train", "--train-csv", &smoke("topics_train.csv"), "--embeddings", &smoke("embeddings.txt"),
        "--model", "TextConvoNet_4", "--seed", "6", "--out-dir", s(plain.path()),
    ]));
    ok(&evaluate(plain.path(), "topics_test.csv"));
    let study = fs::read_to_string(dir.path().join("mstudy.csv")).unwrap();
    let plain_metrics = fs::read_to_string(plain.path().join("metrics.csv")).unwrap();
    let tail = |line: &str, skip: usize| line.split(',').skip(skip).collect::<Vec<_>>().join(",");
    assert_eq!(tail(study.lines().nth(1).unwrap(), 4), tail(plain_metrics.lines().nth(1).unwrap(), 3));
}

#[test]
fn mstudy_scales_m_by_ceiling() {
    let dir = tempfile::tempdir().unwrap();
    ok(&mstudy(dir.path(), "0.25,1", "1", &["--m", "10", "--epochs", "1"]));
    let timing = fs::read_to_string(dir.path().join("mstudy_timing.csv")).unwrap();
    let ms: Vec<&str> = timing.lines().skip(1).map(|l| l.split(',').nth(1).unwrap()).collect();
    assert_eq!(ms, ["3", "10"]);

    let out = mstudy(dir.path(), "0.25", "1", &[]);
    assert_eq!(code(&out), 2);
    assert!(stderr(&out).contains("larger fraction"));
}

#[test]
fn mstudy_training_time_grows_with_m() {
    let mut grows = 0;
    for seed in ["1", "2", "3"] {
        let dir = tempfile::tempdir().unwrap();
        ok(&mstudy(dir.path(), "0.25,1", seed, &["--m", "16", "--epochs", "4", "--patience", "none"]));
        let timing = fs::read_to_string(dir.path().join("mstudy_timing.csv")).unwrap();
        let t: Vec<f64> = timing.lines().skip(1).map(|l| l.split(',').nth(2).unwrap().parse().unwrap()).collect();
        if t[1] >= t[0] {
            grows += 1;
        }
    }
    assert!(grows >= 2, "training time grew with m in only {grows} of 3 runs");
}

#[test]
fn stats_reports_corpus_figures() {
    let dir = tempfile::tempdir().unwrap();
    let three = dir.path().join("three.csv");
    // token lengths 2, 2, 5: mean 3, one example above it
    fs::write(&three, "text,label\nab cd,x\nef gh,y\nij kl mn op qr,x\n").unwrap();
    let out = ok(&convonet(&["stats", s(&three)]));
    assert!(out.contains("exceeding_ratio: 0.3333"), "{out}");
    assert!(out.contains("classes: x=2 y=1"), "{out}");

    let one = dir.path().join("one.csv");
    fs::write(&one, "text,label\n\"a b. a c\",x\n").unwrap();
    let out = ok(&convonet(&["stats", s(&one)]));
    assert!(out.contains("exceeding_ratio: 0.0000"), "{out}");
    // a, b, c
    assert!(out.contains("vocabulary: 3"), "{out}");

    let bad = dir.path().join("bad.csv");
    fs::write(&bad, "text,label\n\"a,x\n").unwrap();
    assert_eq!(code(&convonet(&["stats", s(&bad)])), 2);
}

#[test]
fn compare_verdicts() {
    let dir = tempfile::tempdir().unwrap();
    let t6 = repo("data/reference_results/textconvonet_6.csv");
    let t4 = repo("data/reference_results/textconvonet_4.csv");
    let kim = repo("data/reference_results/kim.csv");
    let out = ok(&convonet(&["compare", s(&t6), s(&kim), "--out-dir", s(dir.path())]));
    assert!(out.contains("Sig. Diff.: Yes"), "{out}");
    let out = ok(&convonet(&["compare", s(&kim), s(&kim), "--out-dir", s(dir.path())]));
    assert!(out.contains("Sig. Diff.: No"), "{out}");
    let out = ok(&convonet(&["compare", s(&t6), s(&t4), "--alpha", "1.0", "--out-dir", s(dir.path())]));
    assert!(out.contains("Sig. Diff.: Yes"), "{out}");
    assert!(fs::read_to_string(dir.path().join("compare.csv")).unwrap().starts_with("w_plus,"));

    let partial = dir.path().join("partial.csv");
    fs::write(&partial, "dataset,metric,value\ndataset1,accuracy,0.5\n").unwrap();
    let out = convonet(&["compare", s(&t6), s(&partial), "--out-dir", s(dir.path())]);
    assert_eq!(code(&out), 2);
    assert!(stderr(&out).contains("dataset1/precision"), "{}", stderr(&out));
}

#[test]
fn gradcheck_passes() {
    let out = ok(&convonet(&["gradcheck"]));
    assert!(out.contains("gradient check passed"), "{out}");
}

#[test]
fn unknown_model_lists_catalog() {
    let dir = tempfile::tempdir().unwrap();
    let out = convonet(&[
        "train", "--train-csv", &smoke("binary_train.csv"), "--embeddings", &smoke("embeddings.txt"),
        "--model", "TextConvoNet_9", "--out-dir", s(dir.path()),
    ]);
    assert_eq!(code(&out), 2);
    assert!(stderr(&out).contains("TextConvoNet_6"));
}
