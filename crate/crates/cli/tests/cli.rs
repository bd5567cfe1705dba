use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};
use std::sync::OnceLock;

use tempfile::TempDir;

fn data(name: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../core/data").join(name)
}

fn longtail(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_longtail")).args(args).output().unwrap()
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

fn json(path: &Path) -> serde_json::Value {
    serde_json::from_slice(&fs::read(path).unwrap()).unwrap()
}

const HAND: &str = "id,label,text\nt1,A,ban muslim refugees\nt2,A,refugees go home\nt3,B,welcome refugees home\nt4,B,muslim food festival\n";

/// One `cnn_scnn` training run on the toy corpus shared by several tests.
fn trained() -> &'static Path {
    static DIR: OnceLock<TempDir> = OnceLock::new();
    DIR.get_or_init(|| {
        let dir = tempfile::tempdir().unwrap();
        let out = longtail(&[
            "train",
            "--dataset",
            s(&data("toy_corpus.csv")),
            "--embeddings",
            s(&data("toy_embeddings.txt")),
            "--kind",
            "cnn_scnn",
            "--seed",
            "3",
            "--non-hate-label",
            "non-hate",
            "--out",
            s(dir.path()),
        ]);
        assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
        dir
    })
    .path()
}

#[test]
fn analyze_hand_dataset() {
    let dir = tempfile::tempdir().unwrap();
    let ds = dir.path().join("hand.csv");
    fs::write(&ds, HAND).unwrap();
    let out = dir.path().join("a");
    assert!(longtail(&["analyze", "--dataset", s(&ds), "--out", s(&out)]).status.success());
    let doc = json(&out.join("uniqueness.json"));
    assert_eq!(doc["tweets"], 4);
    assert_eq!(doc["bins"]["0.4"]["count"], 3);
    assert_eq!(doc["bins"]["0.7"]["count"], 1);
    assert_eq!(doc["bins"]["1.0"]["cumulative_percent"], 100.0);
    let scores = fs::read_to_string(out.join("scores.csv")).unwrap();
    assert!(scores.starts_with("id,label,score,bin\nt1,A,0.3333333333333333,0.4\n"), "{scores}");
    assert!(scores.contains("t4,B,0.6666666666666666,0.7"));

    let again = dir.path().join("b");
    assert!(longtail(&["analyze", "--dataset", s(&ds), "--out", s(&again)]).status.success());
    assert_eq!(fs::read(out.join("uniqueness.json")).unwrap(), fs::read(again.join("uniqueness.json")).unwrap());
}

#[test]
fn analyze_error_exit_codes() {
    let dir = tempfile::tempdir().unwrap();
    let empty = dir.path().join("empty.csv");
    fs::write(&empty, "id,label,text\n").unwrap();
    let out = longtail(&["analyze", "--dataset", s(&empty), "--out", s(&dir.path().join("o"))]);
    assert_eq!(out.status.code(), Some(3));

    let bad = dir.path().join("bad.csv");
    fs::write(&bad, "id,label,text\n1,x,fine\n2,y\n").unwrap();
    let out = longtail(&["analyze", "--dataset", s(&bad), "--out", s(&dir.path().join("o"))]);
    assert_eq!(out.status.code(), Some(3));
    assert!(String::from_utf8_lossy(&out.stderr).contains("bad.csv:3"), "{}", String::from_utf8_lossy(&out.stderr));

    let missing = dir.path().join("nope.csv");
    let out = longtail(&["analyze", "--dataset", s(&missing), "--out", s(&dir.path().join("o"))]);
    assert_eq!(out.status.code(), Some(5));
}

#[test]
fn train_usage_errors() {
    let dir = tempfile::tempdir().unwrap();
    let (corpus, emb) = (data("toy_corpus.csv"), data("toy_embeddings.txt"));
    let base = ["train", "--dataset", s(&corpus), "--embeddings", s(&emb)];
    let o = s(dir.path());
    // --seed is mandatory.
    let out = longtail(&[&base[..], &["--kind", "base_cnn", "--out", o]].concat());
    assert_eq!(out.status.code(), Some(2));
    let out = longtail(&[&base[..], &["--kind", "deep_cnn", "--seed", "1", "--out", o]].concat());
    assert_eq!(out.status.code(), Some(2));
    let out = longtail(&[&base[..], &["--kind", "base_cnn", "--seed", "1", "--set", "dropout=1.5", "--out", o]].concat());
    assert_eq!(out.status.code(), Some(2));
    let out = longtail(&[&base[..], &["--kind", "base_cnn", "--seed", "1", "--set", "colour=red", "--out", o]].concat());
    assert_eq!(out.status.code(), Some(2));
    let out = longtail(&[&base[..], &["--kind", "base_cnn", "--seed", "1", "--non-hate-label", "neutral", "--out", o]].concat());
    assert_eq!(out.status.code(), Some(2));
    assert!(fs::read_dir(dir.path()).unwrap().next().is_none(), "failed runs must not write outputs");
}

#[test]
fn train_outputs_and_manifest() {
    let dir = trained();
    let manifest = json(&dir.join("manifest.json"));
    assert_eq!(manifest["seed"], 3);
    for a in manifest["artifacts"].as_array().unwrap() {
        assert!(dir.join(a.as_str().unwrap()).exists(), "{a}");
    }
    // Conv branches over d = 16 plus the 4200-wide softmax head.
    let active = 2 + 3 + 4 + 2 + 3 + 3 + 2;
    assert_eq!(manifest["param_count"], active * 16 * 100 + 7 * 100 + 4200 * 3 + 3);

    let metrics = json(&dir.join("metrics.json"));
    let folds = metrics["folds"].as_array().unwrap();
    assert_eq!(folds.len(), 5);
    let mean: f64 = folds.iter().map(|f| f["metrics"]["macro"]["f1"].as_f64().unwrap()).sum::<f64>() / 5.0;
    assert!((metrics["average"]["metrics"]["macro"]["f1"].as_f64().unwrap() - mean).abs() <= 1e-12);
    assert!(metrics["average"]["metrics"]["macro_hate"].is_object());

    let preds = fs::read_to_string(dir.join("predictions.csv")).unwrap();
    assert_eq!(preds.lines().count(), 151);
    let record = json(&dir.join("train_record.json"));
    assert_eq!(record[4]["seed"], 7);
    assert_eq!(record[0]["epoch_loss"].as_array().unwrap().len(), 10);
}

#[test]
fn base_cnn_parameter_count() {
    let dir = tempfile::tempdir().unwrap();
    let out = longtail(&[
        "train",
        "--dataset",
        s(&data("toy_corpus.csv")),
        "--embeddings",
        s(&data("toy_embeddings.txt")),
        "--kind",
        "base_cnn",
        "--seed",
        "1",
        "--epochs",
        "1",
        "--out",
        s(dir.path()),
    ]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let manifest = json(&dir.path().join("manifest.json"));
    let conv: usize = [2usize, 3, 4].iter().map(|j| j * 16 * 100 + 100).sum();
    assert_eq!(manifest["param_count"], conv + 1800 * 3 + 3);
    assert_eq!(manifest["kind"], "base_cnn");
}

/// Splits the toy corpus into the rows of `fold` and the rest.
fn fold_datasets(dir: &Path, fold: &str) -> (PathBuf, PathBuf) {
    let corpus = fs::read_to_string(data("toy_corpus.csv")).unwrap();
    let folds = fs::read_to_string(trained().join("folds.csv")).unwrap();
    let assignment: Vec<&str> = folds.lines().skip(1).map(|l| l.split(',').nth(1).unwrap()).collect();
    let mut lines = corpus.lines();
    let header = lines.next().unwrap();
    let (mut held, mut rest) = (vec![header.to_string()], vec![header.to_string()]);
    for (line, f) in lines.zip(&assignment) {
        if *f == fold {
            held.push(line.to_string());
        } else {
            rest.push(line.to_string());
        }
    }
    let (h, r) = (dir.join("held.csv"), dir.join("rest.csv"));
    fs::write(&h, held.join("\n") + "\n").unwrap();
    fs::write(&r, rest.join("\n") + "\n").unwrap();
    (h, r)
}

#[test]
fn evaluate_reloads_weights_exactly() {
    let run = trained();
    let dir = tempfile::tempdir().unwrap();
    let (held, rest) = fold_datasets(dir.path(), "0");
    let weights = run.join("fold-0.ltnn");
    let on_held = dir.path().join("held");
    let on_rest = dir.path().join("rest");
    assert!(longtail(&["evaluate", "--weights", s(&weights), "--dataset", s(&held), "--out", s(&on_held)])
        .status
        .success());
    assert!(longtail(&["evaluate", "--weights", s(&weights), "--dataset", s(&rest), "--out", s(&on_rest)])
        .status
        .success());
    // Same model, same rows: predictions match the ones written during training.
    assert_eq!(
        fs::read_to_string(on_held.join("predictions.csv")).unwrap(),
        fs::read_to_string(run.join("fold-0.predictions.csv")).unwrap()
    );
    let micro = |p: &Path| json(&p.join("eval_report.json"))["metrics"]["micro"]["f1"].as_f64().unwrap();
    assert!(micro(&on_rest) >= micro(&on_held), "{} < {}", micro(&on_rest), micro(&on_held));
    let rows = fs::read_to_string(on_rest.join("predictions.csv")).unwrap().lines().count() - 1;
    let expected = fs::read_to_string(&rest).unwrap().lines().count() - 1;
    assert_eq!(rows, expected);
}

#[test]
fn evaluate_rejects_mismatched_architecture() {
    let run = trained();
    let dir = tempfile::tempdir().unwrap();
    let config = fs::read_to_string(run.join("config.txt"))
        .unwrap()
        .replace("kind = cnn_scnn", "kind = cnn_gru")
        .replace("second_pooling = true", "second_pooling = false");
    let cfg = dir.path().join("gru.txt");
    fs::write(&cfg, config).unwrap();
    let out = longtail(&[
        "evaluate",
        "--weights",
        s(&run.join("fold-1.ltnn")),
        "--config",
        s(&cfg),
        "--vocab",
        s(&run.join("vocab.txt")),
        "--dataset",
        s(&data("toy_corpus.csv")),
        "--out",
        s(&dir.path().join("o")),
    ]);
    assert_eq!(out.status.code(), Some(3));
    let err = String::from_utf8_lossy(&out.stderr);
    assert!(err.contains("gru.w_z") || err.contains("dense.weights"), "{err}");
}

#[test]
fn compare_identical_predictions_flags_empty_set() {
    let dir = tempfile::tempdir().unwrap();
    let gold = dir.path().join("gold.csv");
    fs::write(&gold, HAND).unwrap();
    let p = dir.path().join("p.csv");
    fs::write(&p, "id,pred_label\nt1,A\nt2,B\nt3,B\nt4,A\n").unwrap();
    let out = dir.path().join("o");
    assert!(longtail(&["compare", "--gold", s(&gold), "--pred-a", s(&p), "--pred-b", s(&p), "--out", s(&out)])
        .status
        .success());
    let doc = json(&out.join("atp.json"));
    assert_eq!(doc["columns"][0]["note"], "no additional true positives");
    assert_eq!(doc["columns"][0]["atp_count"], 0);

    let shifted = dir.path().join("shifted.csv");
    fs::write(&shifted, "id,pred_label\nt1,A\nt3,B\nt2,B\nt4,A\n").unwrap();
    let res = longtail(&["compare", "--gold", s(&gold), "--pred-a", s(&shifted), "--pred-b", s(&p), "--out", s(&out)]);
    assert_eq!(res.status.code(), Some(3));
    assert!(String::from_utf8_lossy(&res.stderr).contains("row 2"));
}

#[test]
fn compare_multiple_columns() {
    let dir = tempfile::tempdir().unwrap();
    let gold = dir.path().join("gold.csv");
    fs::write(&gold, HAND).unwrap();
    let write = |name: &str, body: &str| {
        let p = dir.path().join(name);
        fs::write(&p, body).unwrap();
        p
    };
    let a1 = write("scnn.csv", "id,pred_label\nt1,A\nt2,A\nt3,B\nt4,B\n");
    let a2 = write("gru.csv", "id,pred_label\nt1,B\nt2,A\nt3,B\nt4,B\n");
    let b = write("ref.csv", "id,pred_label\nt1,B\nt2,A\nt3,B\nt4,A\n");
    let out = dir.path().join("o");
    let res = longtail(&[
        "compare", "--gold", s(&gold), "--pred-a", s(&a1), "--pred-a", s(&a2), "--pred-b", s(&b), "--out", s(&out),
    ]);
    assert!(res.status.success());
    let doc = json(&out.join("atp.json"));
    assert_eq!(doc["reference"], "ref");
    assert_eq!(doc["columns"][0]["name"], "scnn");
    assert_eq!(doc["columns"][1]["name"], "gru");
    assert_eq!(doc["columns"][1]["ids"], serde_json::json!(["t4"]));
    assert_eq!(doc["columns"][1]["percent"]["0.7"], 100.0);
}
