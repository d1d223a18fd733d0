//! End-to-end checks of the `oda` binary: subcommand round trips and the
//! documented exit codes.

use std::path::PathBuf;
use std::process::Command;

fn oda() -> Command {
    Command::new(env!("CARGO_BIN_EXE_oda"))
}

fn temp_dir(name: &str) -> PathBuf {
    let dir = std::env::temp_dir().join(format!("oda_cli_{name}"));
    std::fs::remove_dir_all(&dir).ok();
    std::fs::create_dir_all(&dir).unwrap();
    dir
}

#[test]
fn gen_train_predict_inspect_round_trip() {
    let dir = temp_dir("round_trip");
    let data = dir.join("blobs.csv");
    let model = dir.join("model.json");
    let preds = dir.join("preds.csv");
    let report = dir.join("train.report.jsonl");

    let out = oda()
        .args(["gen", "blobs", "--n", "400", "--seed", "4"])
        .arg("--out")
        .arg(&data)
        .output()
        .unwrap();
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));

    let out = oda()
        .args(["train", "--k-max", "16", "--seed", "1"])
        .arg("--data")
        .arg(&data)
        .arg("--out")
        .arg(&model)
        .arg("--report")
        .arg(&report)
        .output()
        .unwrap();
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let stdout = String::from_utf8_lossy(&out.stdout);
    assert!(stdout.contains("trained"), "stdout: {stdout}");

    let out = oda()
        .args(["predict", "--label-column", "last"])
        .arg("--model")
        .arg(&model)
        .arg("--data")
        .arg(&data)
        .arg("--out")
        .arg(&preds)
        .output()
        .unwrap();
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let stdout = String::from_utf8_lossy(&out.stdout);
    assert!(stdout.contains("accuracy"), "stdout: {stdout}");

    let preds_text = std::fs::read_to_string(&preds).unwrap();
    assert!(preds_text.starts_with("format_version,row,prediction"));
    assert_eq!(preds_text.lines().count(), 401);

    let report_text = std::fs::read_to_string(&report).unwrap();
    assert!(report_text.lines().next().unwrap().contains("\"kind\":\"header\""));
    assert!(report_text.lines().last().unwrap().contains("\"kind\":\"summary\""));

    let out = oda().arg("inspect").arg("--model").arg(&model).output().unwrap();
    assert!(out.status.success());
    let stdout = String::from_utf8_lossy(&out.stdout);
    assert!(stdout.contains("codebook"));

    std::fs::remove_dir_all(&dir).ok();
}

#[test]
fn cluster_algorithms_run() {
    let dir = temp_dir("cluster");
    let data = dir.join("blobs.csv");
    oda()
        .args(["gen", "blobs", "--n", "300", "--seed", "2"])
        .arg("--out")
        .arg(&data)
        .status()
        .unwrap();
    for (algo, extra) in [
        ("oda", vec!["--k-max", "8"]),
        ("kmeans", vec!["--k", "4"]),
        ("svq", vec!["--k", "4"]),
        ("batch-da", vec!["--k-max", "8"]),
    ] {
        let outfile = dir.join(format!("{algo}.json"));
        let out = oda()
            .args(["cluster", "--label-column", "last", "--algo", algo, "--seed", "3"])
            .args(&extra)
            .arg("--data")
            .arg(&data)
            .arg("--out")
            .arg(&outfile)
            .output()
            .unwrap();
        assert!(
            out.status.success(),
            "{algo}: {}",
            String::from_utf8_lossy(&out.stderr)
        );
        let text = std::fs::read_to_string(&outfile).unwrap();
        assert!(text.contains("format_version"), "{algo} output unversioned");
    }
    std::fs::remove_dir_all(&dir).ok();
}

#[test]
fn bench_writes_versioned_artifacts() {
    let dir = temp_dir("bench");
    let config = dir.join("exp.json");
    std::fs::write(
        &config,
        r#"{
            "name": "gaussians",
            "dataset": {"kind": "blobs", "n": 300, "spread": 1.0, "seed": 4},
            "algorithm": "oda",
            "mode": "classify",
            "divergence": "euclidean",
            "folds": 3,
            "master_seed": 7,
            "params": {"k_max": 12}
        }"#,
    )
    .unwrap();
    let out_dir = dir.join("runs");
    let out = oda()
        .arg("bench")
        .arg("--config")
        .arg(&config)
        .arg("--out-dir")
        .arg(&out_dir)
        .output()
        .unwrap();
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let stdout = String::from_utf8_lossy(&out.stdout);
    assert!(stdout.contains("accuracy"));
    assert!(stdout.contains("reference"));

    let aggregate = std::fs::read_to_string(out_dir.join("aggregate.json")).unwrap();
    assert!(aggregate.contains("\"format_version\""));
    assert!(aggregate.contains("\"std_estimator\": \"sample (n-1)\""));
    let trace = std::fs::read_to_string(out_dir.join("trace.csv")).unwrap();
    assert!(trace.starts_with("format_version,fold,level"));
    for fold in 0..3 {
        assert!(out_dir.join(format!("fold_{fold}.report.jsonl")).exists());
    }
    std::fs::remove_dir_all(&dir).ok();
}

#[test]
fn bench_config_env_override() {
    let dir = temp_dir("bench_env");
    let config = dir.join("real.json");
    std::fs::write(
        &config,
        r#"{
            "name": "tiny",
            "dataset": {"kind": "blobs", "n": 200, "spread": 1.0, "seed": 4},
            "algorithm": "oda",
            "mode": "classify",
            "divergence": "euclidean",
            "folds": 2,
            "master_seed": 5,
            "params": {"k_max": 6}
        }"#,
    )
    .unwrap();
    // The env var wins over a bogus --config path.
    let out = oda()
        .env("ODA_BENCH_CONFIG", &config)
        .args(["bench", "--config", "/nonexistent.json"])
        .arg("--out-dir")
        .arg(dir.join("runs"))
        .output()
        .unwrap();
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    std::fs::remove_dir_all(&dir).ok();
}

#[test]
fn exit_codes_match_contract() {
    let dir = temp_dir("exit_codes");

    // 2: config error (bad algorithm on an otherwise valid invocation).
    let tiny = dir.join("tiny.csv");
    std::fs::write(&tiny, "1.0,2.0\n3.0,4.0\n").unwrap();
    let out = oda()
        .args(["cluster", "--algo", "nonsense"])
        .arg("--data")
        .arg(&tiny)
        .arg("--out")
        .arg(dir.join("out.json"))
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(2));

    // 3: data error (missing file).
    let out = oda()
        .args(["train", "--data", "/nonexistent/x.csv", "--out", "/tmp/m.json"])
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(3));

    // 2: clap-level usage error.
    let out = oda().args(["train", "--no-such-flag"]).output().unwrap();
    assert_eq!(out.status.code(), Some(2));

    // 3: parse error names the line.
    let bad = dir.join("bad.csv");
    std::fs::write(&bad, "1.0,2.0\n3.0,oops\n").unwrap();
    let out = oda()
        .arg("train")
        .arg("--data")
        .arg(&bad)
        .arg("--out")
        .arg(dir.join("m.json"))
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(3));
    assert!(String::from_utf8_lossy(&out.stderr).contains("line 2"));
    std::fs::remove_dir_all(&dir).ok();
}
