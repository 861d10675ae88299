use std::path::Path;
use std::process::{Command, Output};

use aeroppc::harness::ExperimentConfig;

fn aeroppc(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_aeroppc")).args(args).output().unwrap()
}

fn short_config(dir: &Path, duration: f64) -> String {
    let mut cfg = ExperimentConfig::default();
    for sc in cfg.scenarios.values_mut() {
        sc.duration_s = duration;
    }
    let path = dir.join("short.toml");
    std::fs::write(&path, cfg.to_toml_string()).unwrap();
    path.to_str().unwrap().to_string()
}

fn stderr_json(out: &Output) -> serde_json::Value {
    serde_json::from_slice(&out.stderr).unwrap_or_else(|e| panic!("{e}: {}", String::from_utf8_lossy(&out.stderr)))
}

#[test]
fn validate_accepts_the_shipped_config() {
    let out = aeroppc(&["validate"]);
    assert_eq!(out.status.code(), Some(0));
    let v: serde_json::Value = serde_json::from_slice(&out.stdout).unwrap();
    assert_eq!(v["valid"], true);
    assert_eq!(v["config_hash"], ExperimentConfig::default().hash());
    assert!(v["scenarios"]["setpoint"]["position"]["grid_containment"].as_bool().unwrap());
}

#[test]
fn run_writes_trace_and_summary() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = short_config(dir.path(), 0.5);
    let out_dir = dir.path().join("out");
    let out = aeroppc(&[
        "run", "--config", &cfg, "--scenario", "setpoint", "--variant", "proposed", "--seed", "1", "--out",
        out_dir.to_str().unwrap(),
    ]);
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    let csv = std::fs::read_to_string(out_dir.join("setpoint-proposed-seed1.csv")).unwrap();
    assert_eq!(csv.lines().count(), 1 + 501);
    assert!(csv.starts_with("t,p_x,p_y,p_z,"));
    let summary: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(out_dir.join("setpoint-proposed-seed1.summary.json")).unwrap())
            .unwrap();
    assert_eq!(summary["meta"]["seed"], 1);
    assert_eq!(summary["meta"]["variant"], "proposed");
    assert_eq!(summary["trace_sha256"].as_str().unwrap().len(), 64);

    let json_out = aeroppc(&["run", "--config", &cfg, "--format", "json", "--out", out_dir.to_str().unwrap()]);
    assert_eq!(json_out.status.code(), Some(0));
    let trace: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(out_dir.join("setpoint-proposed-seed1.json")).unwrap()).unwrap();
    assert_eq!(trace["meta"], summary["meta"]);
}

#[test]
fn batch_then_table_mirrors_the_comparison_layout() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = short_config(dir.path(), 0.3);
    let out_dir = dir.path().join("batch");
    let out = aeroppc(&["batch", "--config", &cfg, "--trials", "2", "--out", out_dir.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    assert!(out_dir.join("summary.json").exists() && out_dir.join("table.txt").exists());

    let table = aeroppc(&["table", "--input", out_dir.to_str().unwrap()]);
    assert_eq!(table.status.code(), Some(0));
    let text = String::from_utf8(table.stdout).unwrap();
    assert_eq!(text, std::fs::read_to_string(out_dir.join("table.txt")).unwrap());
    for scenario in ["setpoint", "circle", "figure-eight"] {
        let block: Vec<&str> = text.split(&format!("\n{scenario}\n")).nth(1).unwrap().lines().take(5).collect();
        assert!(block[0].contains("Mean ± SD") && block[0].contains("Maximum"));
        let rows: Vec<&str> = block[1..].iter().map(|l| l.trim_start()).collect();
        assert!(rows[0].starts_with("Cascaded PID"));
        assert!(rows[1].starts_with("Without ESO"));
        assert!(rows[2].starts_with("Without preset trajectory"));
        assert!(rows[3].starts_with("Proposed"));
    }

    let csv = aeroppc(&["table", "--input", out_dir.to_str().unwrap(), "--format", "csv"]);
    assert_eq!(String::from_utf8(csv.stdout).unwrap().lines().count(), 1 + 12);
}

#[test]
fn check_exit_code_reflects_violations() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = short_config(dir.path(), 0.3);
    let out_dir = dir.path().join("out");
    let run = aeroppc(&["run", "--config", &cfg, "--out", out_dir.to_str().unwrap()]);
    assert_eq!(run.status.code(), Some(0));
    let trace = out_dir.join("setpoint-proposed-seed1.csv");
    let clean = aeroppc(&["check", trace.to_str().unwrap()]);
    assert_eq!(clean.status.code(), Some(0));
    let report: serde_json::Value = serde_json::from_slice(&clean.stdout).unwrap();
    assert_eq!(report["position_count"], 0);

    // Push one position error outside its bound.
    let text = std::fs::read_to_string(&trace).unwrap();
    let mut lines: Vec<String> = text.lines().map(String::from).collect();
    let header: Vec<&str> = lines[0].split(',').collect();
    let col = header.iter().position(|h| *h == "p_err_y").unwrap();
    let mut fields: Vec<String> = lines[100].split(',').map(String::from).collect();
    fields[col] = "9.5".into();
    lines[100] = fields.join(",");
    let bad = dir.path().join("bad.csv");
    std::fs::write(&bad, lines.join("\n") + "\n").unwrap();
    let flagged = aeroppc(&["check", bad.to_str().unwrap()]);
    assert_eq!(flagged.status.code(), Some(1));
    let report: serde_json::Value = serde_json::from_slice(&flagged.stdout).unwrap();
    assert_eq!(report["position_count"], 1);
    assert_eq!(report["violations"][0]["row"], 99);
    assert_eq!(report["violations"][0]["axis"], 1);
}

#[test]
fn errors_are_json_on_stderr() {
    let out = aeroppc(&["run", "--scenario", "nowhere"]);
    assert_eq!(out.status.code(), Some(2));
    assert_eq!(stderr_json(&out)["error"], "ConfigInvalid");

    let out = aeroppc(&["run", "--variant", "fastest"]);
    assert_eq!(out.status.code(), Some(2));
    assert_eq!(stderr_json(&out)["error"], "usage");

    let dir = tempfile::tempdir().unwrap();
    let bad = dir.path().join("bad.toml");
    std::fs::write(&bad, "schema_version = 7\n").unwrap();
    let out = aeroppc(&["validate", "--config", bad.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(2));
    assert_eq!(stderr_json(&out)["error"], "ConfigInvalid");

    let out = aeroppc(&["check", dir.path().join("missing.csv").to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(2));
    assert_eq!(stderr_json(&out)["error"], "Io");
}
