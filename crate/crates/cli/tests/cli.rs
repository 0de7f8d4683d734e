//! End-to-end runs of the `ctsr` binary.

use std::path::Path;
use std::process::{Command, Output};

use ctsr_core::tensor::Parameterized;
use ctsr_core::{CorpusIndex, Rn2dModel, Split, TimeSeries};

fn ctsr(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_ctsr"))
        .args(args)
        .env("RUST_LOG", "warn")
        .output()
        .expect("binary runs")
}

fn ok(args: &[&str]) -> String {
    let out = ctsr(args);
    assert!(out.status.success(), "ctsr {args:?}: {}", String::from_utf8_lossy(&out.stderr));
    String::from_utf8(out.stdout).unwrap()
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

fn write_archive(root: &Path) {
    for (d, dataset) in ["Coffee", "Wafer"].iter().enumerate() {
        let dir = root.join(dataset);
        std::fs::create_dir_all(&dir).unwrap();
        let mut text = String::new();
        for class in 1..=2 {
            for i in 0..10 {
                let vals: Vec<String> = (0..16 + d).map(|t| format!("{}", ((t * class + i) % 7) as f64 * 0.5)).collect();
                text.push_str(&format!("{class}\t{}\n", vals.join("\t")));
            }
        }
        std::fs::write(dir.join(format!("{dataset}_TRAIN.tsv")), text).unwrap();
    }
}

#[test]
fn ingest_reports_groups_and_is_byte_reproducible() {
    let dir = tempfile::tempdir().unwrap();
    write_archive(dir.path());
    let a = dir.path().join("a.json");
    let b = dir.path().join("b.json");
    let out = ok(&["ingest", "--archive", s(dir.path()), "--length", "16", "--seed", "4", "--out", s(&a)]);
    assert!(out.contains("groups\t4"), "{out}");
    assert!(out.contains("train\t32"), "{out}");
    ok(&["ingest", "--archive", s(dir.path()), "--length", "16", "--seed", "4", "--out", s(&b)]);
    assert_eq!(std::fs::read(&a).unwrap(), std::fs::read(&b).unwrap());
    let manifest = std::fs::read_to_string(dir.path().join("a.json.manifest.json")).unwrap();
    assert!(manifest.contains("\"subcommand\": \"ingest\""), "{manifest}");

    let missing = ctsr(&["ingest", "--archive", s(&dir.path().join("nope")), "--out", s(&a)]);
    assert!(!missing.status.success());
    assert!(String::from_utf8_lossy(&missing.stderr).contains("does not exist"));
}

/// Three test queries against a three-series database, small enough to rank by hand.
fn toy_corpus(dir: &Path) -> std::path::PathBuf {
    let a = vec![1.0, 1.0, -1.0, -1.0];
    let b = vec![1.0, -1.0, 1.0, -1.0];
    let c = vec![-1.0, -1.0, 1.0, 1.0];
    let mk = |id, class: &str, split, values: &Vec<f64>| TimeSeries {
        series_id: id,
        dataset_id: "toy".into(),
        class_label: class.into(),
        split,
        constant: false,
        values: values.clone(),
    };
    let series = vec![
        mk(0, "a", Split::Train, &a),
        mk(1, "a", Split::Train, &b),
        mk(2, "b", Split::Train, &c),
        mk(3, "a", Split::Test, &a),
        mk(4, "b", Split::Test, &a),
        mk(5, "a", Split::Test, &b),
    ];
    let path = dir.join("toy.json");
    CorpusIndex::from_series(4, series).unwrap().save(&path).unwrap();
    path
}

#[test]
fn eval_matches_hand_computation() {
    let dir = tempfile::tempdir().unwrap();
    let corpus = toy_corpus(dir.path());
    let out = dir.path().join("eval");
    ok(&["eval", "--corpus", s(&corpus), "--method", "ed", "--ks", "1,2,3", "--per-query", "--out", s(&out)]);
    let table = std::fs::read_to_string(out.join("eval.csv")).unwrap();
    let mut lines = table.lines();
    assert_eq!(lines.next(), Some("method,metric,k,mean,n_queries,n_unanswerable"));
    // query 3 ranks [0 a, 1 a, 2 b]; query 4 (class b) the same; query 5 ranks [1 a, 0 a, 2 b]
    let expected = [
        ("prec", 1, 2.0 / 3.0),
        ("prec", 2, 2.0 / 3.0),
        ("prec", 3, 5.0 / 9.0),
        ("ap", 1, 2.0 / 3.0),
        ("ap", 2, 2.0 / 3.0),
        ("ap", 3, 7.0 / 9.0),
        ("ndcg", 1, 2.0 / 3.0),
        ("ndcg", 2, 2.0 / 3.0),
        ("ndcg", 3, 5.0 / 6.0),
    ];
    let rows: Vec<Vec<&str>> = lines.map(|l| l.split(',').collect()).collect();
    assert_eq!(rows.len(), expected.len());
    for (row, (metric, k, mean)) in rows.iter().zip(expected) {
        assert_eq!(row[0], "ed");
        assert_eq!(row[1], metric);
        assert_eq!(row[2], k.to_string());
        assert!((row[3].parse::<f64>().unwrap() - mean).abs() < 1e-12, "{row:?}");
        assert_eq!(&row[4..], &["3", "0"]);
    }
    assert!(out.join("per_query.csv").exists());
    assert!(out.join("manifest.json").exists());
}

#[test]
fn eval_k_sweep_and_unknown_method() {
    let dir = tempfile::tempdir().unwrap();
    let corpus = toy_corpus(dir.path());
    let out = dir.path().join("sweep");
    ok(&["eval", "--corpus", s(&corpus), "--method", "ed,dtw", "--ks", "5..15", "--per-query", "--out", s(&out)]);
    let table = std::fs::read_to_string(out.join("eval.csv")).unwrap();
    assert_eq!(table.lines().count(), 1 + 2 * 3 * 11);
    let ttest = std::fs::read_to_string(out.join("ttest.csv")).unwrap();
    assert!(ttest.starts_with("method_a,method_b,metric,k,mean_a,mean_b,t,df,p,significant"));

    let bad = ctsr(&["eval", "--corpus", s(&corpus), "--method", "knn", "--out", s(&out)]);
    assert!(!bad.status.success());
    let err = String::from_utf8_lossy(&bad.stderr);
    for name in ["ed", "dtw", "rn1d", "rn2d"] {
        assert!(err.contains(name), "{err}");
    }
    let missing = ctsr(&["eval", "--corpus", s(&corpus), "--method", "rn2d", "--out", s(&out)]);
    assert!(!missing.status.success());
}

#[test]
fn query_by_id_and_by_file() {
    let dir = tempfile::tempdir().unwrap();
    let corpus = toy_corpus(dir.path());
    let table = ok(&["query", "--corpus", s(&corpus), "--method", "ed", "--series-id", "5", "--top-k", "3"]);
    let rows: Vec<&str> = table.lines().collect();
    assert_eq!(rows[0], "rank,series_id,dataset_id,class_label,score,relevant");
    assert_eq!(rows[1], "1,1,toy,a,0,true");
    assert!(rows[2].starts_with("2,0,toy,a,-2.828"));
    assert!(rows[3].starts_with("3,2,toy,b,-2.828"));
    assert!(rows[3].ends_with(",false"));

    // a copy of a database series comes back first with score 0 and no relevance flag
    let copy = dir.path().join("copy.txt");
    std::fs::write(&copy, "-1\n-1\n1\n1\n").unwrap();
    let out = dir.path().join("hits.csv");
    let table = ok(&["query", "--corpus", s(&corpus), "--method", "dtw", "--query-file", s(&copy), "--out", s(&out)]);
    assert!(table.lines().nth(1).unwrap().starts_with("1,2,toy,b,0,"), "{table}");
    assert!(table.lines().nth(1).unwrap().ends_with(','));
    assert_eq!(std::fs::read_to_string(&out).unwrap(), table);

    let long = dir.path().join("long.txt");
    std::fs::write(&long, "1\n1\n1\n-1\n-1\n-1\n-1\n").unwrap();
    let res = ctsr(&["query", "--corpus", s(&corpus), "--method", "ed", "--query-file", s(&long)]);
    assert!(res.status.success());
    assert!(String::from_utf8_lossy(&res.stderr).contains("resampling"));
}

#[test]
fn query_top_k_bounds_rows() {
    let dir = tempfile::tempdir().unwrap();
    let corpus = dir.path().join("c.json");
    ok(&["synth", "--seed", "1", "--domains", "2", "--classes", "2", "--per-class", "10", "--length", "16", "--out", s(&corpus)]);
    let table = ok(&["query", "--corpus", s(&corpus), "--method", "ed", "--series-id", "0", "--top-k", "8"]);
    assert_eq!(table.lines().count(), 9);
}

#[test]
fn zero_epochs_keep_the_initialization() {
    let dir = tempfile::tempdir().unwrap();
    let corpus = dir.path().join("c.json");
    ok(&["synth", "--seed", "1", "--domains", "2", "--classes", "2", "--per-class", "10", "--length", "16", "--out", s(&corpus)]);
    let out = dir.path().join("run");
    ok(&["train", "--corpus", s(&corpus), "--model", "rn2d", "--epochs", "0", "--seed", "5", "--out", s(&out)]);
    let best = std::fs::read(out.join("best.ckpt")).unwrap();
    assert_eq!(best, Rn2dModel::new(5).to_checkpoint("rn2d", 16).to_bytes());
    assert_eq!(std::fs::read_to_string(out.join("train.csv")).unwrap(), "epoch,mean_loss,val_ndcg10,wall_ms\n");
    let manifest: serde_json::Value = serde_json::from_str(&std::fs::read_to_string(out.join("manifest.json")).unwrap()).unwrap();
    assert_eq!(manifest["epochs"], 0);
    assert_eq!(manifest["model"], "rn2d");
}

#[test]
fn quick_training_run_then_neural_eval() {
    let dir = tempfile::tempdir().unwrap();
    let corpus = dir.path().join("c.json");
    ok(&["synth", "--seed", "2", "--domains", "2", "--classes", "2", "--per-class", "10", "--length", "16", "--out", s(&corpus)]);
    for model in ["rn1d", "rn2d"] {
        let out = dir.path().join(model);
        ok(&[
            "train", "--corpus", s(&corpus), "--model", model, "--epochs", "2", "--steps", "2", "--batch-size", "4", "--val-sample", "4",
            "--out", s(&out),
        ]);
        let log = std::fs::read_to_string(out.join("train.csv")).unwrap();
        assert_eq!(log.lines().count(), 3);
        assert!(out.join("epoch_002.ckpt").exists());
        let eval = dir.path().join(format!("eval_{model}"));
        ok(&[
            "eval", "--corpus", s(&corpus), "--method", model, "--checkpoint", s(&out.join("best.ckpt")), "--out", s(&eval),
        ]);
        let q = ok(&[
            "query", "--corpus", s(&corpus), "--method", model, "--checkpoint", s(&out.join("best.ckpt")), "--series-id", "3",
        ]);
        assert_eq!(q.lines().count(), 9);
    }
}
