//! End-to-end checks of the forrelab binary: exit-code contract and the
//! gen / forrelation round trip.

use std::process::Command;

fn forrelab(args: &[&str]) -> std::process::Output {
    Command::new(env!("CARGO_BIN_EXE_forrelab"))
        .args(args)
        .output()
        .expect("the forrelab binary runs")
}

#[test]
fn verify_e2_passes_with_exit_zero() {
    let out = forrelab(&["verify", "E2", "--n", "2", "--ell", "2", "--T", "2", "--trials", "20", "--seed", "1"]);
    let stdout = String::from_utf8_lossy(&out.stdout);
    assert_eq!(out.status.code(), Some(0), "stdout: {stdout}");
    assert!(stdout.contains("E2 seed=1 PASS"), "stdout: {stdout}");
}

#[test]
fn usage_errors_exit_two() {
    assert_eq!(forrelab(&["suite", "--no-such-flag"]).status.code(), Some(2));
    assert_eq!(forrelab(&["no-such-command"]).status.code(), Some(2));
    assert_eq!(forrelab(&["verify", "E99"]).status.code(), Some(2));
}

#[test]
fn gen_forrelation_round_trip() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("instance.json");
    let path = path.to_str().unwrap();

    let out = forrelab(&["gen", "--n", "6", "--ell", "8", "--seed", "3", "--format", "record", "--out", path]);
    assert_eq!(out.status.code(), Some(0));

    let out = forrelab(&["forrelation", path, "--format", "record"]);
    assert_eq!(out.status.code(), Some(0));
    let record: serde_json::Value =
        serde_json::from_slice(&out.stdout).expect("forrelation emits a JSON record");
    let alpha = record["alpha"].as_f64().unwrap();
    assert!((0.0..=1.0).contains(&alpha));

    let out = forrelab(&["verify-strong", path, "--v", "2", "--format", "record"]);
    assert_eq!(out.status.code(), Some(0));
    let report: serde_json::Value = serde_json::from_slice(&out.stdout).unwrap();
    assert!((report["alpha"].as_f64().unwrap() - alpha).abs() <= 1e-12);
}
