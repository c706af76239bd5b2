use std::collections::BTreeMap;
use std::path::Path;
use std::process::{Command, Output};

fn txgraph(args: &[&str], envs: &[(&str, &Path)]) -> Output {
    let mut cmd = Command::new(env!("CARGO_BIN_EXE_txgraph"));
    cmd.args(args).env_remove("TXGRAPH_DATA_DIR").env_remove("TXGRAPH_OUT_DIR").env_remove("TXGRAPH_SEED");
    // synthetic graphs carry 12 local columns
    cmd.env("TXGRAPH_LOCAL_COUNT", "12");
    for (k, v) in envs {
        cmd.env(k, v);
    }
    cmd.output().unwrap()
}

fn ok(out: &Output) -> String {
    assert!(out.status.success(), "stderr: {}", String::from_utf8_lossy(&out.stderr));
    String::from_utf8(out.stdout.clone()).unwrap()
}

fn synth(dir: &Path) {
    let d = dir.to_str().unwrap();
    ok(&txgraph(&["synth", "--output", d, "--steps", "5", "--min-nodes", "30", "--max-nodes", "50"], &[]));
}

fn read_tree(root: &Path) -> BTreeMap<String, Vec<u8>> {
    let mut out = BTreeMap::new();
    for sub in ["reports", "series", "artifacts"] {
        for e in std::fs::read_dir(root.join(sub)).unwrap() {
            let p = e.unwrap().path();
            out.insert(format!("{sub}/{}", p.file_name().unwrap().to_string_lossy()), std::fs::read(&p).unwrap());
        }
    }
    out
}

#[test]
fn ingest_prints_counts_from_dir_flag_env_or_files() {
    let tmp = tempfile::tempdir().unwrap();
    let data = tmp.path().join("data");
    synth(&data);
    let d = data.to_str().unwrap();
    let stdout = ok(&txgraph(&["ingest", "--data-dir", d], &[]));
    let first = stdout.lines().next().unwrap().to_string();
    assert!(first.starts_with("N=") && first.contains(" E=") && first.ends_with(" T=5"), "{first}");
    assert!(stdout.contains("cross-step edges=0"));

    assert_eq!(ok(&txgraph(&["ingest"], &[("TXGRAPH_DATA_DIR", &data)])), stdout);
    let file = |name: &str| data.join(name).to_str().unwrap().to_string();
    let (f, e, c) = (file("elliptic_txs_features.csv"), file("elliptic_txs_edgelist.csv"), file("elliptic_txs_classes.csv"));
    let args = ["ingest", "--features", &f, "--edges", &e, "--classes", &c];
    assert_eq!(ok(&txgraph(&args, &[])), stdout);

    let json = ok(&txgraph(&["ingest", "--data-dir", d, "--json"], &[]));
    let v: serde_json::Value = serde_json::from_str(&json).unwrap();
    assert_eq!(v["time_step_count"], 5);
}

#[test]
fn usage_errors_exit_two_and_data_errors_exit_one() {
    let tmp = tempfile::tempdir().unwrap();
    let data = tmp.path().join("data");
    synth(&data);
    let d = data.to_str().unwrap();
    for args in [
        vec!["frobnicate"],
        vec!["ingest", "--no-such-flag"],
        vec!["ingest"],
        vec!["eval", "--data-dir", d, "--model", "rf", "--skip"],
        vec!["eval", "--data-dir", d, "--model", "logreg", "--estimators", "3"],
        vec!["eval", "--data-dir", d, "--model", "nope"],
        vec!["eval", "--data-dir", d, "--model", "rf", "--features", "xf"],
        vec!["eval", "--data-dir", d, "--model", "rf", "--boundary", "5"],
        vec!["train", "--data-dir", d, "--model", "rf", "--features", "af+ne"],
        vec!["layout", "--data-dir", d, "--mode", "gcn"],
        vec!["train", "--data-dir", d, "--model", "mlp", "--weights", "0.3"],
    ] {
        let out = txgraph(&args, &[]);
        assert_eq!(out.status.code(), Some(2), "{args:?}: {}", String::from_utf8_lossy(&out.stderr));
        assert!(!out.stderr.is_empty());
    }
    let missing = tmp.path().join("missing");
    let out = txgraph(&["ingest", "--data-dir", missing.to_str().unwrap()], &[]);
    assert_eq!(out.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&out.stderr).contains("error"));
}

#[test]
fn eval_is_reproducible_and_reports_render() {
    let tmp = tempfile::tempdir().unwrap();
    let data = tmp.path().join("data");
    synth(&data);
    let d = data.to_str().unwrap();
    let (a, b) = (tmp.path().join("a"), tmp.path().join("b"));
    for out in [&a, &b] {
        let args = ["eval", "--data-dir", d, "--out", out.to_str().unwrap(), "--model", "rf", "--features", "af", "--seed", "7", "--boundary", "3", "--estimators", "5"];
        let stdout = ok(&txgraph(&args, &[]));
        assert!(stdout.contains("RandomForest^AF"));
    }
    let (ta, tb) = (read_tree(&a), read_tree(&b));
    assert_eq!(ta.keys().cloned().collect::<Vec<_>>(), vec![
        "artifacts/rf-af-b3-s7.json".to_string(),
        "reports/rf-af-b3-s7.csv".to_string(),
        "reports/rf-af-b3-s7.json".to_string(),
        "series/rf-af-b3-s7.csv".to_string(),
    ]);
    assert_eq!(ta, tb);
    let report: serde_json::Value = serde_json::from_slice(&ta["reports/rf-af-b3-s7.json"]).unwrap();
    assert_eq!(report["config"]["seed"], 7);
    assert_eq!(report["config"]["hyperparameters"]["estimators"], 5);
    assert_eq!(report["config"]["hyperparameters"]["max_features"], 50);
    let series = String::from_utf8(ta["series/rf-af-b3-s7.csv"].clone()).unwrap();
    assert!(series.starts_with("time_step,f1,support_illicit,flags\n"));
    assert_eq!(series.lines().count(), 3);

    let args = ["eval", "--data-dir", d, "--out", a.to_str().unwrap(), "--model", "logreg", "--features", "lf", "--boundary", "3", "--epochs", "20"];
    ok(&txgraph(&args, &[]));
    assert!(a.join("reports/logreg-lf-b3-s0.json").exists(), "seed defaults to 0");
    let table = ok(&txgraph(&["report", "--out", a.to_str().unwrap()], &[]));
    let lines: Vec<&str> = table.lines().collect();
    assert_eq!(lines.len(), 4);
    assert!(lines[0].starts_with("Method") && lines[0].contains("MicroAVG F1"));
    assert!(lines[2].starts_with("Logistic Regr^LF") && lines[3].starts_with("RandomForest^AF"));
    let csv = ok(&txgraph(&["report", "--out", a.to_str().unwrap(), "--csv"], &[]));
    assert!(csv.starts_with("Method,Illicit Precision,Illicit Recall,Illicit F1,MicroAVG F1\n"));
}

#[test]
fn train_records_flag_values() {
    let tmp = tempfile::tempdir().unwrap();
    let data = tmp.path().join("data");
    synth(&data);
    let out = tmp.path().join("out");
    let args = [
        "train", "--data-dir", data.to_str().unwrap(), "--out", out.to_str().unwrap(), "--model", "gcn", "--skip",
        "--epochs", "4", "--lr", "0.001", "--weights", "0.3,0.7", "--through", "3",
    ];
    let path = ok(&txgraph(&args, &[])).trim().to_string();
    let art: serde_json::Value = serde_json::from_str(&std::fs::read_to_string(&path).unwrap()).unwrap();
    assert_eq!(art["family"], "skip-gcn");
    assert_eq!(art["seed"], 0);
    assert_eq!(art["trained_through"], 3);
    let hp = &art["hyperparameters"];
    assert_eq!((hp["kind"].as_str(), hp["epochs"].as_u64(), hp["lr"].as_f64(), hp["hidden"].as_u64()), (Some("gcn"), Some(4), Some(0.001), Some(100)));
    assert_eq!(hp["class_weights"], serde_json::json!({ "licit": 0.3, "illicit": 0.7 }));
    assert_eq!(art["loss_trace"].as_array().unwrap().len(), 4);
}

#[test]
fn embed_layout_and_features_write_outputs() {
    let tmp = tempfile::tempdir().unwrap();
    let data = tmp.path().join("data");
    synth(&data);
    let d = data.to_str().unwrap();
    let out = tmp.path().join("out");
    let o = out.to_str().unwrap();
    let art = ok(&txgraph(&["train", "--data-dir", d, "--out", o, "--model", "gcn", "--epochs", "3", "--hidden", "6", "--through", "4"], &[]));
    let art = art.trim();

    ok(&txgraph(&["embed", "--data-dir", d, "--out", o, "--model", art], &[]));
    let emb = std::fs::read_to_string(out.join("embeddings/gcn-af-t4-s0.csv")).unwrap();
    let header: Vec<&str> = emb.lines().nth(1).unwrap().split(',').collect();
    assert_eq!(header.len(), 7);

    ok(&txgraph(&["layout", "--data-dir", d, "--out", o], &[]));
    ok(&txgraph(&["layout", "--data-dir", d, "--out", o, "--mode", "gcn", "--model", art], &[]));
    let ingest = ok(&txgraph(&["ingest", "--data-dir", d], &[]));
    let n: usize = ingest.split_whitespace().next().unwrap().trim_start_matches("N=").parse().unwrap();
    for mode in ["raw", "gcn"] {
        let v: serde_json::Value = serde_json::from_str(&std::fs::read_to_string(out.join(format!("layouts/{mode}.json"))).unwrap()).unwrap();
        assert_eq!(v["coords"].as_array().unwrap().len(), n, "{mode}");
    }

    ok(&txgraph(&["features", "--data-dir", d, "--out", o, "--set", "lf"], &[]));
    let lf = std::fs::read_to_string(out.join("features/lf.csv")).unwrap();
    assert_eq!(lf.lines().count(), n + 2);
    ok(&txgraph(&["features", "--data-dir", d, "--out", o, "--aggregate"], &[]));
    assert!(out.join("features/aggregates.csv").exists());
}

#[test]
fn serve_reports_bind_failure() {
    let tmp = tempfile::tempdir().unwrap();
    let data = tmp.path().join("data");
    synth(&data);
    let taken = std::net::TcpListener::bind("127.0.0.1:0").unwrap();
    let addr = taken.local_addr().unwrap().to_string();
    let out = txgraph(&["serve", "--data-dir", data.to_str().unwrap(), "--bind", &addr], &[]);
    assert_eq!(out.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&out.stderr).contains("cannot bind"));
}
