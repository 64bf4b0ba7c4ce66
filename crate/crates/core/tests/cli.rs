use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use cgd::dataset::GroupDataset;
use cgd::synth::Setting;

fn cgd(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_cgd"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn path_str(p: &Path) -> &str {
    p.to_str().unwrap()
}

#[test]
fn gen_writes_parseable_deterministic_csv() {
    let dir = tempfile::tempdir().unwrap();
    let a = dir.path().join("a.csv");
    let b = dir.path().join("b.csv");
    for p in [&a, &b] {
        let out = cgd(&["gen", "noise_simple", "--seed", "1", "--out", path_str(p)]);
        assert!(
            out.status.success(),
            "{}",
            String::from_utf8_lossy(&out.stderr)
        );
    }
    let text = fs::read_to_string(&a).unwrap();
    assert_eq!(text, fs::read_to_string(&b).unwrap());
    assert_eq!(text.lines().next(), Some("x1,x2,label,group,split"));
    assert_eq!(text.lines().filter(|l| l.ends_with(",train")).count(), 1000);
    let parsed = GroupDataset::read_csv(&a).unwrap();
    assert_eq!(parsed, Setting::NoiseSimple.generate(1, None).unwrap());
}

#[test]
fn unknown_setting_is_usage_error() {
    let dir = tempfile::tempdir().unwrap();
    let out = cgd(&["gen", "moons", "--out", path_str(&dir.path().join("x.csv"))]);
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn bad_config_is_usage_error() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("c.json");
    fs::write(
        &cfg,
        r#"{"settings": ["noise_simple"], "rules": [], "seeds": [0]}"#,
    )
    .unwrap();
    let out = cgd(&[
        "run",
        "--config",
        path_str(&cfg),
        "--out",
        path_str(dir.path()),
    ]);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("rules"));
}

#[test]
fn missing_config_is_runtime_error() {
    let dir = tempfile::tempdir().unwrap();
    let out = cgd(&[
        "run",
        "--config",
        path_str(&dir.path().join("nope.json")),
        "--out",
        path_str(dir.path()),
    ]);
    assert_eq!(out.status.code(), Some(1));
}

#[test]
fn run_then_report() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("c.json");
    fs::write(
        &cfg,
        r#"{"settings": ["rotation_simple"], "rules": ["GROUP_DRO_EG", "CGD"], "seeds": [0, 1],
            "grid": {"eta_alpha": [0.1, 0.01]}, "trainer": {"epochs": 25}}"#,
    )
    .unwrap();
    let out_dir = dir.path().join("out");
    let out = cgd(&[
        "run",
        "--config",
        path_str(&cfg),
        "--out",
        path_str(&out_dir),
        "--jobs",
        "1",
    ]);
    assert!(
        out.status.success(),
        "{}",
        String::from_utf8_lossy(&out.stderr)
    );
    let out = cgd(&["report", "--out", path_str(&out_dir)]);
    assert!(out.status.success());
    let summary = fs::read_to_string(out_dir.join("summary.csv")).unwrap();
    let lines: Vec<&str> = summary.lines().collect();
    assert_eq!(
        lines[0],
        "setting,rule,worst_loss_mean,worst_loss_std,variance"
    );
    assert_eq!(lines.len(), 3);
    let svg = fs::read_to_string(out_dir.join("alpha_rotation_simple_CGD.svg")).unwrap();
    assert_eq!(svg.matches("<polyline").count(), 3);
}

#[test]
fn report_on_empty_dir_warns_and_succeeds() {
    let dir = tempfile::tempdir().unwrap();
    let out = cgd(&["report", "--out", path_str(dir.path())]);
    assert_eq!(out.status.code(), Some(0));
    assert!(String::from_utf8_lossy(&out.stderr).contains("warning"));
    let summary = fs::read_to_string(dir.path().join("summary.csv")).unwrap();
    assert_eq!(summary.lines().count(), 1);
}

#[test]
fn audit_skips_horizon_one() {
    let dir = tempfile::tempdir().unwrap();
    let out = cgd(&[
        "audit",
        "--horizon",
        "1,50",
        "--seeds",
        "2",
        "--out",
        path_str(dir.path()),
    ]);
    assert!(
        out.status.success(),
        "{}",
        String::from_utf8_lossy(&out.stderr)
    );
    let report: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(dir.path().join("audit.json")).unwrap()).unwrap();
    let horizons = report["horizons"].as_array().unwrap();
    assert!(horizons[0]["skipped"]
        .as_str()
        .unwrap()
        .contains("eta_alpha"));
    assert!(horizons[1]["skipped"].is_null());
    assert_eq!(
        horizons[1]["descent"]["passed"],
        horizons[1]["descent"]["total"]
    );
    assert_eq!(report["flat_problem"][1]["fosp"]["passed"], 1);
}
