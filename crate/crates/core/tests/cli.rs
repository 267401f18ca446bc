use std::path::Path;
use std::process::{Command, Output};

use serde_json::Value;

fn degenflow(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_degenflow")).args(args).output().unwrap()
}

fn write_config(dir: &Path, body: &str) -> String {
    let path = dir.join("config.json");
    std::fs::write(&path, body).unwrap();
    path.to_string_lossy().into_owned()
}

fn error_report(out: &Output) -> Value {
    let stderr = String::from_utf8_lossy(&out.stderr);
    let line = stderr.lines().last().unwrap();
    serde_json::from_str(line).unwrap()
}

const SMALL_RUN: &str = r#"{
    "grid": {"nx": 16, "ny": 16},
    "potential": {"kind": "power_q", "q": 2.0},
    "source": {"name": "two-blocks"},
    "pipeline": ["primal", "dual", "gap"]
}"#;

#[test]
fn run_writes_artifacts_into_out_dir() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write_config(tmp.path(), SMALL_RUN);
    let out_dir = tmp.path().join("out");
    let out =
        degenflow(&["run", &cfg, "--out-dir", out_dir.to_str().unwrap(), "--log-level", "warn", "--threads", "2"]);
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    for file in ["manifest.json", "gap.json", "u.field", "sigma_dual.field", "config.json"] {
        assert!(out_dir.join(file).is_file(), "{file}");
    }
    let gap: Value = serde_json::from_str(&std::fs::read_to_string(out_dir.join("gap.json")).unwrap()).unwrap();
    assert!(gap["relative_gap"].as_f64().unwrap().abs() < 1e-4);
}

#[test]
fn validate_accepts_and_rejects() {
    let tmp = tempfile::tempdir().unwrap();
    let good = write_config(tmp.path(), SMALL_RUN);
    assert_eq!(degenflow(&["validate", &good]).status.code(), Some(0));

    let bad = write_config(tmp.path(), &SMALL_RUN.replace(r#"["primal", "dual", "gap"]"#, r#"["gap"]"#));
    let out = degenflow(&["validate", &bad]);
    assert_eq!(out.status.code(), Some(2));
    let report = error_report(&out);
    assert_eq!(report["error"], "ConfigInvalid");
    assert_eq!(report["exit_code"], 2);
}

#[test]
fn config_errors_exit_with_two() {
    let tmp = tempfile::tempdir().unwrap();
    let missing = tmp.path().join("absent.json");
    assert_eq!(degenflow(&["run", missing.to_str().unwrap()]).status.code(), Some(2));

    let garbage = write_config(tmp.path(), "{ not json");
    assert_eq!(degenflow(&["validate", &garbage]).status.code(), Some(2));

    let unknown = write_config(tmp.path(), &SMALL_RUN.replace("two-blocks", "spiral"));
    let out_dir = tmp.path().join("out");
    let out = degenflow(&["run", &unknown, "--out-dir", out_dir.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(2));
    assert_eq!(error_report(&out)["error"], "UnknownSource");
}

#[test]
fn numerical_failure_exits_with_three() {
    let tmp = tempfile::tempdir().unwrap();
    let body = SMALL_RUN
        .replace(r#"["primal", "dual", "gap"]"#, r#"["dual"]"#)
        .replace(r#""pipeline""#, r#""dual": {"max_iterations": 1}, "pipeline""#);
    let cfg = write_config(tmp.path(), &body);
    let out_dir = tmp.path().join("out");
    let out = degenflow(&["run", &cfg, "--out-dir", out_dir.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(3));
    let report = error_report(&out);
    assert_eq!(report["stage"], "dual");
    assert_eq!(report["error"], "MaxIterations");
}

#[test]
fn export_csv_prints_or_writes() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write_config(tmp.path(), &SMALL_RUN.replace(r#"["primal", "dual", "gap"]"#, r#"["primal"]"#));
    let run_dir = tmp.path().join("run");
    assert_eq!(degenflow(&["run", &cfg, "--out-dir", run_dir.to_str().unwrap()]).status.code(), Some(0));
    let field = run_dir.join("u.field");

    let out = degenflow(&["export-csv", field.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(0));
    let csv = String::from_utf8(out.stdout).unwrap();
    assert_eq!(csv.lines().count(), 1 + 16 * 16);

    let csv_dir = tmp.path().join("csv");
    let out = degenflow(&["export-csv", field.to_str().unwrap(), "--out-dir", csv_dir.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(0));
    assert_eq!(std::fs::read_to_string(csv_dir.join("u.csv")).unwrap(), csv);

    let missing = tmp.path().join("nothing.field");
    assert_eq!(degenflow(&["export-csv", missing.to_str().unwrap()]).status.code(), Some(2));
}
