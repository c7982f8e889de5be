//! End-to-end checks of the `sdwave` binary: exit codes, file output,
//! and flag overrides, driven through a real process spawn.

use std::fs;
use std::path::Path;
use std::process::{Command, Output};

fn sdwave(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_sdwave"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn write_cfg(dir: &Path, name: &str, body: &str) -> String {
    let path = dir.join(name);
    fs::write(&path, body).unwrap();
    path.to_string_lossy().into_owned()
}

#[test]
fn small_stochastic_run_succeeds_and_writes_files() {
    let tmp = tempfile::tempdir().unwrap();
    let out = tmp.path().join("out");
    let cfg = write_cfg(
        tmp.path(),
        "run.cfg",
        &format!(
            "command = spatial\nnoise = white\nn_modes = 8\nmc_samples = 2\n\
             h_levels = 1/2 1/4\nh_ref = 1/8\nk_ref = 1/16\n\
             output_path = {}\n",
            out.display()
        ),
    );
    let res = sdwave(&[&cfg, "--threads", "1"]);
    assert!(
        res.status.success(),
        "stderr: {}",
        String::from_utf8_lossy(&res.stderr)
    );
    assert!(out.join("errors.csv").is_file());
    assert!(out.join("rates.csv").is_file());
    assert!(out.join("meta.txt").is_file());
    let stdout = String::from_utf8_lossy(&res.stdout);
    assert!(stdout.contains("displacement rate"));
    assert!(stdout.contains("wrote"));
}

#[test]
fn seed_and_out_dir_overrides_take_effect() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write_cfg(
        tmp.path(),
        "run.cfg",
        "command = energy\nmc_samples = 2\nh_ref = 1/4\nk_ref = 0.25\nseed = 1\n",
    );
    let out = tmp.path().join("elsewhere");
    let res = sdwave(&[
        &cfg,
        "--seed",
        "99",
        "--out-dir",
        out.to_str().unwrap(),
        "--threads",
        "1",
    ]);
    assert!(
        res.status.success(),
        "stderr: {}",
        String::from_utf8_lossy(&res.stderr)
    );
    let meta = fs::read_to_string(out.join("meta.txt")).unwrap();
    assert!(meta.contains("seed = 99"), "meta: {meta}");
}

#[test]
fn unknown_config_key_is_named_on_stderr() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write_cfg(
        tmp.path(),
        "bad.cfg",
        "command = spatial\nnoise = white\nwavelength = 3\n",
    );
    let res = sdwave(&[&cfg]);
    assert!(!res.status.success());
    let stderr = String::from_utf8_lossy(&res.stderr);
    assert!(stderr.contains("wavelength"), "stderr: {stderr}");
    assert!(stderr.contains("line 3"), "stderr: {stderr}");
}

#[test]
fn zero_sample_override_is_rejected() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write_cfg(
        tmp.path(),
        "run.cfg",
        "command = energy\nh_ref = 1/4\nk_ref = 0.25\n",
    );
    let res = sdwave(&[&cfg, "--samples", "0"]);
    assert!(!res.status.success());
    let stderr = String::from_utf8_lossy(&res.stderr);
    assert!(stderr.contains("mc_samples"), "stderr: {stderr}");
}

#[test]
fn missing_config_file_fails_cleanly() {
    let res = sdwave(&["/nonexistent/path.cfg"]);
    assert!(!res.status.success());
    assert!(!String::from_utf8_lossy(&res.stderr).is_empty());
}
