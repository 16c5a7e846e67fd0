use std::path::Path;
use std::process::{Command, Output};

use serde_json::Value;

fn polywalk(dir: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_polywalk")).current_dir(dir).args(args).output().unwrap()
}

fn simplex(dir: &Path, n: usize) {
    let rows: Vec<Vec<f64>> = (0..n).map(|i| (0..n).map(|j| if i == j { -1.0 } else { 0.0 }).collect()).collect();
    let body = serde_json::json!({ "A": rows, "b": vec![0.0; n], "Aeq": [vec![1.0; n]], "beq": [1.0] });
    std::fs::write(dir.join("simplex.json"), body.to_string()).unwrap();
}

fn stderr_error(out: &Output) -> Value {
    let line = String::from_utf8_lossy(&out.stderr);
    let last = line.lines().last().expect("an error line on stderr");
    serde_json::from_str(last).unwrap()
}

#[test]
fn sample_writes_points_on_the_simplex() {
    let tmp = tempfile::tempdir().unwrap();
    simplex(tmp.path(), 4);
    let out = polywalk(tmp.path(), &["sample", "--body", "simplex.json", "--k", "200", "--seed", "3", "--summary", "s.json"]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let text = String::from_utf8(out.stdout).unwrap();
    let mut lines = text.lines();
    assert_eq!(lines.next(), Some("# schema_version=1"));
    assert_eq!(lines.next(), Some("chain,x1,x2,x3,x4"));
    let rows: Vec<Vec<f64>> = lines.map(|l| l.split(',').skip(1).map(|v| v.parse().unwrap()).collect()).collect();
    assert_eq!(rows.len(), 200);
    for r in &rows {
        assert!((r.iter().sum::<f64>() - 1.0).abs() < 1e-9 && r.iter().all(|v| *v >= 0.0));
    }
    let summary: Value = serde_json::from_str(&std::fs::read_to_string(tmp.path().join("s.json")).unwrap()).unwrap();
    assert_eq!(summary["schema_version"], 1);
    assert_eq!(summary["dim"], 3);
}

#[test]
fn seeds_change_the_draws() {
    let tmp = tempfile::tempdir().unwrap();
    simplex(tmp.path(), 4);
    let a = polywalk(tmp.path(), &["sample", "--body", "simplex.json", "--k", "50", "--seed", "1"]);
    let b = polywalk(tmp.path(), &["sample", "--body", "simplex.json", "--k", "50", "--seed", "2"]);
    assert_ne!(a.stdout, b.stdout);
}

#[test]
fn cdf_is_monotone_from_zero_to_one() {
    let tmp = tempfile::tempdir().unwrap();
    std::fs::write(tmp.path().join("z.json"), r#"{"z": [0.1, 0.4, 0.35, 0.9, 0.2]}"#).unwrap();
    let out = polywalk(tmp.path(), &["cdf", "--z", "z.json", "--gammas", "0:1:0.01"]);
    assert!(out.status.success());
    let text = String::from_utf8(out.stdout).unwrap();
    let probs: Vec<f64> = text.lines().skip(2).map(|l| l.split(',').nth(1).unwrap().parse().unwrap()).collect();
    assert_eq!(probs.len(), 101);
    assert!(probs.windows(2).all(|w| w[1] >= w[0] - 1e-12));
    assert_eq!(probs[0], 0.0);
    assert_eq!(*probs.last().unwrap(), 1.0);
}

#[test]
fn gammas_may_come_from_the_input() {
    let tmp = tempfile::tempdir().unwrap();
    let out = polywalk(tmp.path(), &["cdf", "--z", r#"{"z": [0, 1], "gammas": [0.3]}"#]);
    assert!(out.status.success());
    let text = String::from_utf8(out.stdout).unwrap();
    let p: f64 = text.lines().nth(2).unwrap().split(',').nth(1).unwrap().parse().unwrap();
    assert!((p - 0.3).abs() < 1e-12);
}

#[test]
fn help_and_version_succeed() {
    let tmp = tempfile::tempdir().unwrap();
    assert!(polywalk(tmp.path(), &["--help"]).status.success());
    assert!(polywalk(tmp.path(), &["sample", "--help"]).status.success());
    assert!(polywalk(tmp.path(), &["--version"]).status.success());
}

#[test]
fn usage_errors_exit_2_with_json() {
    let tmp = tempfile::tempdir().unwrap();
    let out = polywalk(tmp.path(), &["sample", "--no-such-flag"]);
    assert_eq!(out.status.code(), Some(2));
    let err = stderr_error(&out);
    assert_eq!(err["schema_version"], 1);
    assert_eq!(err["error"]["code"], 2);

    simplex(tmp.path(), 3);
    let out = polywalk(tmp.path(), &["sample", "--body", "simplex.json", "--walk", "dikin", "--target", r#"{"kind":"dirichlet","alpha":[2,2,2]}"#]);
    assert_eq!(out.status.code(), Some(2), "uniform-only walk with a Dirichlet target");
    assert_eq!(polywalk(tmp.path(), &["cdf", "--z", "[1, 2]", "--gammas", "1:0:0.1"]).status.code(), Some(2));
}

#[test]
fn infeasible_bodies_exit_3() {
    let tmp = tempfile::tempdir().unwrap();
    std::fs::write(tmp.path().join("empty.json"), r#"{"A": [[1, 0], [-1, 0], [0, 1], [0, -1]], "b": [-1, 0, 1, 1]}"#).unwrap();
    let out = polywalk(tmp.path(), &["sample", "--body", "empty.json"]);
    assert_eq!(out.status.code(), Some(3));
    assert_eq!(stderr_error(&out)["error"]["kind"], "infeasible");
}

#[test]
fn missing_files_exit_5() {
    let tmp = tempfile::tempdir().unwrap();
    let out = polywalk(tmp.path(), &["sample", "--body", "missing.json"]);
    assert_eq!(out.status.code(), Some(5));
    assert_eq!(stderr_error(&out)["error"]["kind"], "io");
    assert_eq!(polywalk(tmp.path(), &["backtest", "--config", "nope.toml", "--data", "."]).status.code(), Some(5));
}

#[test]
fn diagnose_flags_disagreeing_chains() {
    let tmp = tempfile::tempdir().unwrap();
    let mut csv = String::from("# schema_version=1\nchain,x1\n");
    for c in 0..4 {
        for i in 0..200 {
            // Each chain sits at its own level: between-chain variance dominates.
            let v = c as f64 * 10.0 + ((i * 7919) % 100) as f64 / 100.0;
            csv.push_str(&format!("{c},{v}\n"));
        }
    }
    std::fs::write(tmp.path().join("bad.csv"), csv).unwrap();
    let out = polywalk(tmp.path(), &["diagnose", "--samples", "bad.csv", "--out", "report.json"]);
    assert_eq!(out.status.code(), Some(4));
    let report: Value = serde_json::from_str(&std::fs::read_to_string(tmp.path().join("report.json")).unwrap()).unwrap();
    assert_eq!(report["report"]["pass"], false);
    assert_eq!(report["chains"], 4);
}

#[test]
fn sampled_chains_pass_diagnose() {
    let tmp = tempfile::tempdir().unwrap();
    simplex(tmp.path(), 4);
    let out = polywalk(tmp.path(), &["sample", "--body", "simplex.json", "--k", "4000", "--seed", "2", "--out", "s.csv", "--gate"]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let out = polywalk(tmp.path(), &["diagnose", "--samples", "s.csv"]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stdout));
}

#[test]
fn round_reports_a_transform() {
    let tmp = tempfile::tempdir().unwrap();
    std::fs::write(tmp.path().join("box.json"), r#"{"A": [[1, 0], [-1, 0], [0, 1], [0, -1]], "b": [100, 100, 1, 1]}"#).unwrap();
    let out = polywalk(tmp.path(), &["round", "--body", "box.json", "--seed", "1"]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let doc: Value = serde_json::from_slice(&out.stdout).unwrap();
    assert_eq!(doc["schema_version"], 1);
    assert_eq!(doc["converged"], true);
    assert!(doc["final_ratio"].as_f64().unwrap() <= 4.0);
    assert_eq!(doc["transform"]["lmap"].as_array().unwrap().len(), 2);
}

#[test]
fn synth_then_backtest() {
    let tmp = tempfile::tempdir().unwrap();
    let dir = tmp.path();
    std::fs::write(dir.join("synth.toml"), "warmup_days = 260\n").unwrap();
    std::fs::write(dir.join("bt.toml"), "k = 8\nsort_factor = \"value\"\nlookback_days = 250\n").unwrap();
    let out = polywalk(dir, &["synth", "--assets", "10", "--years", "0.5", "--config", "synth.toml", "--out", "m"]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    for f in ["returns.csv", "scores.csv", "benchmark.csv", "sectors.csv", "synth.json"] {
        assert!(dir.join("m").join(f).exists(), "{f}");
    }
    let out = polywalk(dir, &["backtest", "--config", "bt.toml", "--data", "m", "--out", "o", "--quintiles", "cap"]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let paths = std::fs::read_to_string(dir.join("o/paths.csv")).unwrap();
    let mut lines = paths.lines();
    assert_eq!(lines.next(), Some("# schema_version=1"));
    assert!(lines.next().unwrap().starts_with("date,benchmark,path_1,"));
    let summary: Value = serde_json::from_str(&std::fs::read_to_string(dir.join("o/summary.json")).unwrap()).unwrap();
    assert_eq!(summary["schema_version"], 1);
    assert_eq!(summary["summary"]["n_paths"], 8);
    let quint: Value = serde_json::from_str(&std::fs::read_to_string(dir.join("o/quintile_summary.json")).unwrap()).unwrap();
    assert_eq!(quint["summary"]["n_paths"], 5);
}

#[test]
fn bad_thread_setting_is_a_usage_error() {
    let tmp = tempfile::tempdir().unwrap();
    let out = Command::new(env!("CARGO_BIN_EXE_polywalk"))
        .current_dir(tmp.path())
        .env("POLYWALK_THREADS", "zero")
        .args(["cdf", "--z", "[1, 2]", "--gammas", "1.5"])
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(2));
}
