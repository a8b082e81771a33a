use std::fs;
use std::path::Path;
use std::process::{Command, Output};

const SMALL: &str = r#"{
  "kernel": { "atoms": [[-1, 0.5], [1, 0.5]] },
  "grid": { "x_min": -50, "x_max": 50, "h": 0.1 },
  "time": { "t_end": 12, "snap_dt": 0.5 },
  "front": { "x0": 30, "fit_window": [4, 12] },
  "weinberger": { "tol_c": 0.2 },
  "validate": { "pairs": 2, "comparison_t": 1, "invariance_t": 2 }
}"#;

fn nlkpp(dir: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_nlkpp"))
        .args(args)
        .arg("--out")
        .arg(dir.join("out"))
        .output()
        .unwrap()
}

fn with_config(text: &str) -> (tempfile::TempDir, String) {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("config.json");
    fs::write(&path, text).unwrap();
    let path = path.to_str().unwrap().to_string();
    (dir, path)
}

#[test]
fn speed_then_bounds_reports_the_sandwich() {
    let (dir, cfg) = with_config(SMALL);
    let out = nlkpp(dir.path(), &["speed", "--config", &cfg]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let out = nlkpp(dir.path(), &["bounds", "--config", &cfg]);
    assert!(out.status.success());
    let json: serde_json::Value = serde_json::from_str(&fs::read_to_string(dir.path().join("out/bounds.json")).unwrap()).unwrap();
    assert!(json["report"]["c_measured"].is_number());
    assert_eq!(json["report"]["verdict"], "waves_exist");
}

#[test]
fn simulate_writes_both_formats() {
    let (dir, cfg) = with_config(SMALL);
    assert!(nlkpp(dir.path(), &["simulate", "--config", &cfg]).status.success());
    assert!(nlkpp(dir.path(), &["simulate", "--format", "csv", "--config", &cfg]).status.success());
    for f in ["trajectory.bin", "trajectory.csv", "trajectory.json"] {
        assert!(dir.path().join("out").join(f).exists(), "{f}");
    }
}

#[test]
fn weinberger_writes_probe_table() {
    let (dir, cfg) = with_config(SMALL);
    let out = nlkpp(dir.path(), &["weinberger", "--config", &cfg]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    assert!(String::from_utf8_lossy(&out.stdout).contains("spreading speed in"));
    assert!(dir.path().join("out/probes.csv").exists());
}

#[test]
fn validate_passes_with_exit_zero() {
    let (dir, cfg) = with_config(SMALL);
    let out = nlkpp(dir.path(), &["validate", "--config", &cfg, "--seed", "3"]);
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stdout));
    let json: serde_json::Value = serde_json::from_str(&fs::read_to_string(dir.path().join("out/validate.json")).unwrap()).unwrap();
    assert_eq!(json["report"]["passed"], true);
}

#[test]
fn bad_configs_exit_with_one() {
    let dir = tempfile::tempdir().unwrap();
    let out = nlkpp(dir.path(), &["speed"]);
    assert_eq!(out.status.code(), Some(1));

    let (dir, cfg) = with_config(r#"{"kernel": {"gallery": "gaussian"}, "time": {"t_ed": 3}}"#);
    let out = nlkpp(dir.path(), &["bounds", "--config", &cfg]);
    assert_eq!(out.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&out.stderr).contains("time"));
}
