//! End-to-end runs of the `qkernel` binary.

use std::fs;
use std::path::Path;
use std::process::{Command, Output};

fn qkernel(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_qkernel"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn write_config(dir: &Path, body: &str) -> String {
    let path = dir.join("run.toml");
    fs::write(&path, body).unwrap();
    path.to_string_lossy().into_owned()
}

#[test]
fn budget_prints_the_rounded_estimate() {
    let out = qkernel(&["budget", "--strategy", "randomized", "--l", "60000"]);
    assert!(out.status.success());
    let text = String::from_utf8(out.stdout).unwrap();
    assert!(text.contains("≈220 h"), "{text}");
    let out = qkernel(&["budget", "--strategy", "inversion"]);
    assert!(String::from_utf8(out.stdout).unwrap().contains("13116661760"));
}

#[test]
fn invalid_config_names_the_key() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), "[measurement]\nr = 0\n");
    let out = qkernel(&["--config", &cfg, "kernel"]);
    assert!(!out.status.success());
    let err = String::from_utf8(out.stderr).unwrap();
    assert!(err.contains("measurement.r"), "{err}");

    let cfg = write_config(dir.path(), "[measurement]\nshots = 10\n");
    let out = qkernel(&["--config", &cfg, "kernel"]);
    assert!(!out.status.success());
    assert!(String::from_utf8(out.stderr).unwrap().contains("shots"));
}

#[test]
fn kernel_reruns_are_reproducible() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(
        dir.path(),
        "[circuit]\nn_qubits = 4\nlayers = 2\n[measurement]\nr = 4\ns = 256\np = 0.1\n[experiment]\nn_pairs = 6\n",
    );
    let run = |sub: &str, threads: &str| {
        let out_dir = dir.path().join(sub);
        let out = qkernel(&["--config", &cfg, "--seed", "3", "--threads", threads, "--out", out_dir.to_str().unwrap(), "kernel"]);
        assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
        assert!(out_dir.join("metadata.json").exists());
        fs::read_to_string(out_dir.join("kernel.csv")).unwrap()
    };
    let a = run("a", "1");
    let b = run("b", "2");
    assert_eq!(a, b);
    assert_eq!(a.lines().count(), 7);
}

#[test]
fn qfim_check_reports_identity() {
    let dir = tempfile::tempdir().unwrap();
    let out_dir = dir.path().join("q");
    let out = qkernel(&["--out", out_dir.to_str().unwrap(), "qfim-check"]);
    assert!(out.status.success());
    let json: serde_json::Value = serde_json::from_str(&fs::read_to_string(out_dir.join("qfim.json")).unwrap()).unwrap();
    assert!(json["max_abs_deviation_from_identity"].as_f64().unwrap() < 1e-6);
}
