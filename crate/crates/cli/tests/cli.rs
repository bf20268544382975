use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use serde_json::Value;
use tsnmf_testkit as kit;

fn tsnmf(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_tsnmf"))
        .args(args)
        .output()
        .expect("spawn tsnmf")
}

fn stdout_json(out: &Output) -> Value {
    assert!(out.status.success(), "stderr: {}", String::from_utf8_lossy(&out.stderr));
    serde_json::from_slice(&out.stdout).expect("stdout is JSON")
}

fn stderr_error(out: &Output) -> Value {
    assert!(!out.status.success());
    let v: Value = serde_json::from_slice(&out.stderr).expect("stderr is JSON");
    v["error"].clone()
}

/// Writes a small three-cluster dataset; returns (data, labels) paths.
fn write_blobs(dir: &Path) -> (PathBuf, PathBuf) {
    let (x, labels) = kit::gaussian_blobs(10, 4, 3, 10.0, 3);
    let data = dir.join("blobs.csv");
    let label_path = dir.join("blobs_labels.txt");
    tsnmf::io::write_matrix_csv(&data, x.samples()).unwrap();
    tsnmf::io::write_labels(&label_path, &labels).unwrap();
    (data, label_path)
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

#[test]
fn version_prints_package_version() {
    let out = tsnmf(&["version"]);
    assert!(out.status.success());
    assert_eq!(String::from_utf8(out.stdout).unwrap().trim(), format!("tsnmf {}", env!("CARGO_PKG_VERSION")));
}

#[test]
fn run_writes_report_and_per_seed_outputs() {
    let dir = tempfile::tempdir().unwrap();
    let (data, labels) = write_blobs(dir.path());
    let out_dir = dir.path().join("out");
    let summary = stdout_json(&tsnmf(&[
        "run", "--data", s(&data), "--labels", s(&labels), "--m", "3", "--max-outer", "2",
        "--label-fraction", "0.2", "--seeds", "0-1,5", "--dump-similarity", "--out", s(&out_dir),
    ]));
    assert_eq!(summary["method"], "tsnmf");
    assert_eq!(summary["seeds"], 3);
    assert!(summary["acc"]["mean"].as_f64().unwrap() > 0.0);

    let report: Value = serde_json::from_str(&fs::read_to_string(out_dir.join("report.json")).unwrap()).unwrap();
    assert_eq!(report["config"]["k"], 3);
    assert_eq!(report["config"]["m"], 3);
    assert_eq!(report["seeds"].as_array().unwrap().len(), 3);
    assert!(report.get("wall_clock_seconds").is_none());
    assert_eq!(fs::read_to_string(out_dir.join("seeds.csv")).unwrap().lines().count(), 4);
    assert_eq!(fs::read_to_string(out_dir.join("trace.csv")).unwrap().lines().count(), 7);
    for seed in [0, 1, 5] {
        let a = fs::read_to_string(out_dir.join(format!("assignment_seed{seed}.txt"))).unwrap();
        assert_eq!(a.lines().count(), 30);
        assert!(out_dir.join(format!("similarity_seed{seed}_iter2.csv")).exists());
    }
    assert!(out_dir.join("timing.json").exists());
}

#[test]
fn config_file_values_are_overridden_by_flags() {
    let dir = tempfile::tempdir().unwrap();
    let (data, labels) = write_blobs(dir.path());
    let cfg = dir.path().join("cfg.json");
    fs::write(&cfg, r#"{"k": 3, "m": 2, "max_outer": 1, "lambda": 0.5}"#).unwrap();
    let out_dir = dir.path().join("out");
    stdout_json(&tsnmf(&[
        "run", "--data", s(&data), "--labels", s(&labels), "--config", s(&cfg),
        "--lambda", "0.1", "--out", s(&out_dir),
    ]));
    let report: Value = serde_json::from_str(&fs::read_to_string(out_dir.join("report.json")).unwrap()).unwrap();
    assert_eq!(report["config"]["m"], 2);
    assert_eq!(report["config"]["lambda"], 0.1);

    fs::write(&cfg, r#"{"k": 3, "gamma": 1}"#).unwrap();
    let err = stderr_error(&tsnmf(&["run", "--data", s(&data), "--labels", s(&labels), "--config", s(&cfg)]));
    assert_eq!(err["kind"], "json");
}

#[test]
fn baselines_and_fixed_constraints() {
    let dir = tempfile::tempdir().unwrap();
    let (data, labels) = write_blobs(dir.path());
    for method in ["snmf", "esnmf"] {
        let out_dir = dir.path().join(method);
        let summary = stdout_json(&tsnmf(&[
            "run", "--data", s(&data), "--labels", s(&labels), "--method", method,
            "--m", "3", "--out", s(&out_dir),
        ]));
        assert_eq!(summary["method"], method);
    }

    // Unlabeled data with a constraints file still runs; --k is then required.
    let cons = dir.path().join("c.txt");
    fs::write(&cons, "0,1,1\n0,20,-1\n").unwrap();
    let out_dir = dir.path().join("fixed");
    let summary = stdout_json(&tsnmf(&[
        "run", "--data", s(&data), "--constraints", s(&cons), "--k", "3", "--m", "2",
        "--max-outer", "1", "--out", s(&out_dir),
    ]));
    assert!(summary["acc"].is_null());
    let err = stderr_error(&tsnmf(&["run", "--data", s(&data), "--constraints", s(&cons)]));
    assert_eq!(err["kind"], "invalid_argument");
}

#[test]
fn graph_and_eval_subcommands() {
    let dir = tempfile::tempdir().unwrap();
    let (data, labels) = write_blobs(dir.path());
    let graph = dir.path().join("g.csv");
    let info = stdout_json(&tsnmf(&["graph", "--data", s(&data), "--p", "4", "--out", s(&graph)]));
    assert_eq!(info["n"], 30);
    assert_eq!(info["p"], 4);
    let text = fs::read_to_string(&graph).unwrap();
    assert_eq!(text.lines().count(), 30);
    assert!(text.lines().all(|l| l.split(',').count() == 30));

    let pred = dir.path().join("pred.txt");
    let truth: Vec<usize> = fs::read_to_string(&labels).unwrap().lines().map(|l| l.parse().unwrap()).collect();
    let shifted: Vec<String> = truth.iter().map(|l| ((l + 1) % 3).to_string()).collect();
    fs::write(&pred, shifted.join("\n")).unwrap();
    let scores = stdout_json(&tsnmf(&["eval", "--pred", s(&pred), "--truth", s(&labels)]));
    assert_eq!(scores["acc"], 1.0);
    assert!((scores["nmi"].as_f64().unwrap() - 1.0).abs() < 1e-12);
}

#[test]
fn failures_exit_nonzero_with_structured_errors() {
    let dir = tempfile::tempdir().unwrap();
    let (data, labels) = write_blobs(dir.path());

    let err = stderr_error(&tsnmf(&["run", "--data", s(&dir.path().join("nope.csv")), "--k", "2"]));
    assert_eq!(err["kind"], "io");
    assert!(err["message"].as_str().unwrap().contains("nope.csv"));

    let bad = dir.path().join("bad.csv");
    fs::write(&bad, "1,2\n3,x\n").unwrap();
    let err = stderr_error(&tsnmf(&["graph", "--data", s(&bad), "--out", s(&dir.path().join("g.csv"))]));
    assert_eq!(err["kind"], "parse");

    let err = stderr_error(&tsnmf(&["run", "--data", s(&data), "--labels", s(&labels), "--lambda=-1"]));
    assert_eq!(err["kind"], "invalid_argument");

    let err = stderr_error(&tsnmf(&["run", "--data", s(&data), "--labels", s(&labels), "--seeds", "3-1"]));
    assert_eq!(err["kind"], "invalid_argument");

    let cons = dir.path().join("c.txt");
    fs::write(&cons, "0,1,1\n1,0,-1\n").unwrap();
    let err = stderr_error(&tsnmf(&["run", "--data", s(&data), "--labels", s(&labels), "--constraints", s(&cons)]));
    assert_eq!(err["kind"], "conflicting_constraint");
}

#[test]
fn reruns_are_byte_identical() {
    let dir = tempfile::tempdir().unwrap();
    let (data, labels) = write_blobs(dir.path());
    let run = |name: &str| {
        let out_dir = dir.path().join(name);
        stdout_json(&tsnmf(&[
            "run", "--data", s(&data), "--labels", s(&labels), "--m", "3", "--max-outer", "2",
            "--seeds", "1,2", "--dump-similarity", "--out", s(&out_dir),
        ]));
        out_dir
    };
    let (a, b) = (run("a"), run("b"));
    let mut names: Vec<_> = fs::read_dir(&a).unwrap().map(|e| e.unwrap().file_name()).collect();
    names.sort();
    for name in names.iter().filter(|n| n.to_str() != Some("timing.json")) {
        assert_eq!(fs::read(a.join(name)).unwrap(), fs::read(b.join(name)).unwrap(), "{name:?}");
    }
}
