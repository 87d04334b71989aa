use std::path::Path;
use std::process::{Command, Output};

fn serorecency(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_serorecency")).args(args).output().expect("binary runs")
}

fn code(out: &Output) -> i32 {
    out.status.code().expect("exit code")
}

fn simulate(dir: &Path, model: &str) -> std::path::PathBuf {
    let out = serorecency(&["simulate", "--model", model, "--scenario", "ideal", "--seed", "5", "--out", dir.to_str().unwrap()]);
    assert_eq!(code(&out), 0, "{}", String::from_utf8_lossy(&out.stderr));
    let line = String::from_utf8(out.stdout).unwrap();
    line.lines().next().unwrap().into()
}

const SHORT: [&str; 8] = ["--iterations", "1200", "--burn-in", "600", "--adapt", "300", "--thin", "2"];

#[test]
fn help_and_version_succeed() {
    assert_eq!(code(&serorecency(&["--help"])), 0);
    assert_eq!(code(&serorecency(&["--version"])), 0);
    assert_eq!(code(&serorecency(&["fit", "--help"])), 0);
}

#[test]
fn usage_errors_exit_one() {
    assert_eq!(code(&serorecency(&[])), 1);
    assert_eq!(code(&serorecency(&["bogus"])), 1);
    assert_eq!(code(&serorecency(&["simulate", "--model", "NOPE", "--out", "x"])), 1);
    let dir = tempfile::tempdir().unwrap();
    let out = serorecency(&["study", "--model", "AR1", "--replicates", "0", "--out", dir.path().to_str().unwrap()]);
    assert_eq!(code(&out), 1);
}

#[test]
fn unreadable_data_exits_two() {
    let dir = tempfile::tempdir().unwrap();
    let bad = dir.path().join("bad.csv");
    std::fs::write(&bad, "this,is\nnot,a panel\n").unwrap();
    let out = serorecency(&["fit", "--data", bad.to_str().unwrap(), "--model", "AR1", "--out", dir.path().join("fit").to_str().unwrap()]);
    assert_eq!(code(&out), 2);
    let out = serorecency(&["recency", "--chains", dir.path().join("missing").to_str().unwrap(), "--out", "x"]);
    assert_eq!(code(&out), 2);
}

#[test]
fn simulate_fit_recency_diagnose_round_trip() {
    let dir = tempfile::tempdir().unwrap();
    let data = simulate(&dir.path().join("sim"), "AR1");
    assert!(dir.path().join("sim/scenario.toml").exists());
    let fit_dir = dir.path().join("fit");
    let mut args = vec!["fit", "--data", data.to_str().unwrap(), "--model", "AR1", "--seed", "3", "--out", fit_dir.to_str().unwrap()];
    args.extend(SHORT);
    let out = serorecency(&args);
    assert!(matches!(code(&out), 0 | 3), "{}", String::from_utf8_lossy(&out.stderr));
    assert!(fit_dir.join("manifest.json").exists());
    assert!(fit_dir.join("fit.json").exists());

    let rec_dir = dir.path().join("rec");
    let out = serorecency(&["recency", "--chains", fit_dir.to_str().unwrap(), "--rhat-gate", "1e9", "--out", rec_dir.to_str().unwrap()]);
    assert_eq!(code(&out), 0, "{}", String::from_utf8_lossy(&out.stderr));
    let rows = std::fs::read_to_string(rec_dir.join("recency.csv")).unwrap();
    assert_eq!(rows.lines().count(), 4);
    assert!(rows.lines().nth(1).unwrap().starts_with("0,AR1,ideal,"));
    let density = std::fs::read_to_string(rec_dir.join("density.csv")).unwrap();
    assert_eq!(density.lines().count(), 202);

    let out = serorecency(&["diagnose", "--chains", fit_dir.to_str().unwrap()]);
    assert_eq!(code(&out), 0);
    let table = String::from_utf8(out.stdout).unwrap();
    assert!(table.lines().nth(1).unwrap().starts_with("tau,"));
}

#[test]
fn impossible_gate_exits_three() {
    let dir = tempfile::tempdir().unwrap();
    let data = simulate(&dir.path().join("sim"), "AR1");
    let fit_dir = dir.path().join("fit");
    let mut args = vec!["fit", "--data", data.to_str().unwrap(), "--model", "AR1", "--rhat-gate", "0.5", "--out", fit_dir.to_str().unwrap()];
    args.extend(SHORT);
    assert_eq!(code(&serorecency(&args)), 3);
    let out = serorecency(&["recency", "--chains", fit_dir.to_str().unwrap(), "--rhat-gate", "0.5", "--out", dir.path().join("rec").to_str().unwrap()]);
    assert_eq!(code(&out), 3);
}

#[test]
fn study_writes_report() {
    let dir = tempfile::tempdir().unwrap();
    let out_dir = dir.path().join("study");
    let mut args = vec![
        "study", "--scenario", "ideal", "--model", "AR1", "--replicates", "1", "--individuals", "0", "--chains", "2", "--quiet",
        "--out", out_dir.to_str().unwrap(),
    ];
    args.extend(SHORT);
    let out = serorecency(&args);
    assert_eq!(code(&out), 0, "{}", String::from_utf8_lossy(&out.stderr));
    for f in ["summary.csv", "fits.csv", "recency_chart.svg"] {
        assert!(out_dir.join(f).exists(), "{f}");
    }
}
