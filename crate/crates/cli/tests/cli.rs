use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use inflap_cli::{parse_config, PRESETS};
use serde_json::Value;

fn fixture(name: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("tests/fixtures").join(name)
}

fn inflap(args: &[&str], envs: &[(&str, &Path)]) -> Output {
    let mut cmd = Command::new(env!("CARGO_BIN_EXE_inflap"));
    cmd.args(args).env_remove("INFLAP_OUT_DIR");
    for (k, v) in envs {
        cmd.env(k, v);
    }
    cmd.output().expect("inflap runs")
}

fn run_fixture(name: &str, out: &Path) -> Output {
    inflap(&["run", fixture(name).to_str().unwrap(), "--out", out.to_str().unwrap()], &[])
}

fn manifest(dir: &Path) -> Value {
    serde_json::from_str(&fs::read_to_string(dir.join("manifest.json")).unwrap()).unwrap()
}

#[test]
fn presets_list_names_every_preset() {
    let out = inflap(&["presets", "list"], &[]);
    assert!(out.status.success());
    let text = String::from_utf8(out.stdout).unwrap();
    assert_eq!(text.lines().count(), PRESETS.len());
    for p in PRESETS {
        assert!(text.contains(p.name), "{} missing", p.name);
    }
}

#[test]
fn unknown_preset_is_an_error_with_manifest() {
    let dir = tempfile::tempdir().unwrap();
    let out = inflap(&["check", "no-such-preset", "--out", dir.path().to_str().unwrap()], &[]);
    assert_eq!(out.status.code(), Some(1));
    let m = manifest(dir.path());
    assert_eq!(m["status"], "error");
    assert!(m["failure_reason"].as_str().unwrap().contains("no-such-preset"));
}

#[test]
fn parse_error_reports_line_and_key() {
    let dir = tempfile::tempdir().unwrap();
    let out = run_fixture("error.conf", dir.path());
    assert_eq!(out.status.code(), Some(1));
    let err = String::from_utf8(out.stderr).unwrap();
    assert!(err.contains("line"), "{err}");
    let m = manifest(dir.path());
    assert_eq!(m["exit_code"], 1);
    assert!(m["config_hash"].is_null());
}

#[test]
fn passing_run_writes_reports() {
    let dir = tempfile::tempdir().unwrap();
    let out = run_fixture("pass.conf", dir.path());
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    let m = manifest(dir.path());
    assert_eq!(m["status"], "pass");
    assert_eq!(m["config_hash"].as_str().unwrap().len(), 64);
    let summary: Value = serde_json::from_str(&fs::read_to_string(dir.path().join("summary.json")).unwrap()).unwrap();
    assert_eq!(summary["verdicts"]["nondegeneracy"], true);
    assert!(summary["verdicts"]["decay"].is_null());
    let files: Vec<&str> = m["files"].as_array().unwrap().iter().map(|f| f.as_str().unwrap()).collect();
    assert!(files.iter().any(|f| f.ends_with("nondegeneracy.csv")));
    assert!(files.iter().any(|f| f.ends_with("residual.csv")));
}

#[test]
fn failing_verdict_exits_two() {
    let dir = tempfile::tempdir().unwrap();
    let out = run_fixture("fail.conf", dir.path());
    assert_eq!(out.status.code(), Some(2));
    assert_eq!(manifest(dir.path())["status"], "verdict_failed");
}

#[test]
fn decay_csv_has_one_row_per_radius() {
    let dir = tempfile::tempdir().unwrap();
    let conf = dir.path().join("decay.conf");
    fs::write(
        &conf,
        "experiment.name = decay-rows\n\
         grid.n = 129\n\
         grid.half_width = 1\n\
         model.kind = zero\n\
         boundary.kind = aronsson\n\
         boundary.a = 1 -1\n\
         analysis.checks = decay\n\
         analysis.k_max = 4\n\
         analysis.alpha_pred = 1.3333333333333333\n",
    )
    .unwrap();
    let out_dir = dir.path().join("out");
    let out = inflap(&["run", conf.to_str().unwrap(), "--out", out_dir.to_str().unwrap()], &[]);
    assert!(matches!(out.status.code(), Some(0 | 2)), "{}", String::from_utf8_lossy(&out.stderr));
    let csv = fs::read_to_string(out_dir.join("decay.csv")).unwrap();
    let mut lines = csv.lines();
    assert_eq!(lines.next(), Some("center_x,center_y,k,r,sup_abs,sup_pos,sup_neg"));
    let rows: Vec<&str> = lines.collect();
    assert_eq!(rows.len(), 5);
    for (k, row) in rows.iter().enumerate() {
        assert_eq!(row.split(',').nth(2), Some(k.to_string().as_str()));
    }
}

#[test]
fn env_var_sets_output_directory() {
    let dir = tempfile::tempdir().unwrap();
    let out = inflap(&["run", fixture("pass.conf").to_str().unwrap()], &[("INFLAP_OUT_DIR", dir.path())]);
    assert_eq!(out.status.code(), Some(0));
    assert!(dir.path().join("manifest.json").exists());
    assert!(dir.path().join("summary.json").exists());
}

#[test]
fn reruns_are_byte_identical() {
    let a = tempfile::tempdir().unwrap();
    let b = tempfile::tempdir().unwrap();
    run_fixture("pass.conf", a.path());
    let out = inflap(
        &["run", fixture("pass.conf").to_str().unwrap(), "--out", b.path().to_str().unwrap(), "--threads", "2"],
        &[],
    );
    assert_eq!(out.status.code(), Some(0));
    for name in ["summary.json", "nondegeneracy.csv", "residual.csv"] {
        assert_eq!(fs::read(a.path().join(name)).unwrap(), fs::read(b.path().join(name)).unwrap(), "{name}");
    }
}

#[test]
fn presets_round_trip_through_serialization() {
    for p in PRESETS {
        let cfg = parse_config(p.text).unwrap();
        let again = parse_config(&cfg.serialize()).unwrap();
        assert_eq!(cfg.serialize(), again.serialize(), "{}", p.name);
    }
}
