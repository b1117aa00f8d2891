use std::path::PathBuf;
use std::process::Command;

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_dam-isac"))
}

fn default_config() -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../../configs/default.toml")
}

#[test]
fn missing_config_exits_one_and_names_the_path() {
    let out = bin().args(["sse-sweep", "--config", "/nonexistent/cfg.toml"]).output().unwrap();
    assert_eq!(out.status.code(), Some(1));
    let err = String::from_utf8_lossy(&out.stderr);
    assert!(err.contains("/nonexistent/cfg.toml"), "{err}");
}

#[test]
fn unknown_flag_exits_one() {
    let out = bin().args(["solve", "--frobnicate"]).output().unwrap();
    assert_eq!(out.status.code(), Some(1));
}

#[test]
fn malformed_config_exits_one() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("bad.toml");
    std::fs::write(&cfg, "power_dbm = \"loud\"\n").unwrap();
    let out = bin().arg("crb-sweep").arg("--config").arg(&cfg).output().unwrap();
    assert_eq!(out.status.code(), Some(1));
}

#[test]
fn crb_sweep_is_byte_identical_across_runs() {
    let dir = tempfile::tempdir().unwrap();
    let run = |sub: &str| {
        let out_dir = dir.path().join(sub);
        let out = bin()
            .arg("crb-sweep")
            .arg("--config")
            .arg(default_config())
            .args(["--seed", "11", "--trials", "5", "--out"])
            .arg(&out_dir)
            .output()
            .unwrap();
        assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
        (
            std::fs::read_to_string(out_dir.join("crb_rmse_vs_power.csv")).unwrap(),
            std::fs::read_to_string(out_dir.join("crb_rmse_vs_power.manifest.json")).unwrap(),
        )
    };
    let a = run("a");
    let b = run("b");
    assert!(a == b, "reruns differ");
    let csv = a.0;
    assert!(csv.starts_with("scheme,power_dbm,metric,value,trials,stderr\n"));
}

#[test]
fn solve_writes_a_dump() {
    let dir = tempfile::tempdir().unwrap();
    let out = bin()
        .arg("solve")
        .arg("--config")
        .arg(default_config())
        .arg("--out")
        .arg(dir.path())
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    let dump: serde_json::Value = serde_json::from_slice(&std::fs::read(dir.path().join("solve.json")).unwrap()).unwrap();
    assert!(dump["worst_sse"]["optimized"].as_f64().unwrap() > 0.0);
    assert_eq!(dump["sca"]["converged"], serde_json::Value::Bool(true));
}

#[test]
fn validate_seed_seven_passes() {
    let out = bin().args(["validate", "--seed", "7"]).output().unwrap();
    let text = String::from_utf8_lossy(&out.stdout);
    assert_eq!(out.status.code(), Some(0), "{text}");
    assert_eq!(text.matches("PASS").count(), 20, "{text}");
}
