use std::path::Path;
use std::process::{Command, Output};

fn hnse(out: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_hnse")).args(args).env("HNSE_OUTPUT_DIR", out).output().unwrap()
}

fn run_dirs(base: &Path) -> Vec<std::path::PathBuf> {
    let mut v: Vec<_> = std::fs::read_dir(base).unwrap().map(|e| e.unwrap().path()).collect();
    v.sort();
    v
}

#[test]
fn exit_codes() {
    let tmp = tempfile::tempdir().unwrap();
    assert_eq!(hnse(tmp.path(), &["--set", "beta=1.3", "simulate"]).status.code(), Some(2));
    assert_eq!(hnse(tmp.path(), &["--set", "colour=red", "pipeline"]).status.code(), Some(2));
    assert_eq!(hnse(tmp.path(), &["--config", "/nonexistent.conf", "simulate"]).status.code(), Some(2));
    assert_eq!(hnse(tmp.path(), &["lattice", "annulus", "--lambda", "10", "--k", "-1"]).status.code(), Some(2));
    assert_eq!(hnse(tmp.path(), &["no-such-command"]).status.code(), Some(2));
    let ok = hnse(tmp.path(), &["lattice", "gaps", "--limit", "1000"]);
    assert!(ok.status.success(), "{}", String::from_utf8_lossy(&ok.stderr));
}

#[test]
fn output_dir_from_environment() {
    let tmp = tempfile::tempdir().unwrap();
    let o = hnse(tmp.path(), &["--output-dir", "/should/not/be/used", "lattice", "gaps", "--limit", "100"]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let dirs = run_dirs(tmp.path());
    assert_eq!(dirs.len(), 1);
    assert!(dirs[0].file_name().unwrap().to_string_lossy().starts_with("run-"));
    assert!(dirs[0].join("gaps.csv").exists());
}

#[test]
fn annulus_warns_on_near_integer_bounds() {
    let tmp = tempfile::tempdir().unwrap();
    let o = hnse(tmp.path(), &["lattice", "annulus", "--lambda", "25.0000000000001", "--k", "1"]);
    assert!(o.status.success());
    assert!(String::from_utf8_lossy(&o.stderr).contains("warning"));
    let csv = std::fs::read_to_string(run_dirs(tmp.path())[0].join("annulus_points.csv")).unwrap();
    assert_eq!(csv.lines().count(), 1 + 12 + 8);
    let quiet = hnse(tmp.path(), &["lattice", "annulus", "--lambda", "25.5", "--k", "1"]);
    assert!(!String::from_utf8_lossy(&quiet.stderr).contains("warning"));
}

#[test]
fn averaging_check_writes_trend() {
    let tmp = tempfile::tempdir().unwrap();
    let o = hnse(
        tmp.path(),
        &[
            "--seed",
            "2",
            "--set",
            "low_radius=8",
            "averaging-check",
            "--mu",
            "1e4,1e5",
            "--s",
            "0.15",
            "--samples",
            "4",
        ],
    );
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    assert!(String::from_utf8_lossy(&o.stdout).contains("trend slope"));
    let dir = &run_dirs(tmp.path())[0];
    assert!(dir.join("mu-1e5/averaging.csv").exists());
    assert!(dir.join("mu-1e4/averaging.csv").exists());
    let trend: serde_json::Value =
        serde_json::from_slice(&std::fs::read(dir.join("averaging_trend.json")).unwrap()).unwrap();
    assert_eq!(trend["kind"], "averaging_trend");
    assert_eq!(trend["result"]["mus"].as_array().unwrap().len(), 2);
    assert!(trend["result"]["slope"].is_number());
}
