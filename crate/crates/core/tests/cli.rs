//! End-to-end checks of the command-line interface: subcommands, CSV
//! output, and the exit-code contract (0 ok, 2 config, 3 budget, 4 assert).

use std::path::PathBuf;
use std::process::Command;

use encctl::harness::{four_tank_config, RunConfig, Scheme};

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_encctl"))
}

/// Mid-size ring keeps CLI runs fast while preserving message headroom.
fn small_config() -> RunConfig {
    let mut cfg = four_tank_config();
    cfg.steps = 10;
    cfg.crypto.rgsw.log_n = 11;
    cfg.crypto.rgsw.q = None;
    cfg.crypto.rgsw.special_p = None;
    cfg.output = None;
    cfg
}

fn write_config(dir: &tempfile::TempDir, cfg: &RunConfig) -> PathBuf {
    let path = dir.path().join("config.json");
    std::fs::write(&path, serde_json::to_string_pretty(cfg).unwrap()).unwrap();
    path
}

#[test]
fn run_writes_csv_and_summary() {
    let dir = tempfile::tempdir().unwrap();
    let path = write_config(&dir, &small_config());
    let out = dir.path().join("traj.csv");
    let output = bin()
        .args(["run", "--config"])
        .arg(&path)
        .args(["--steps", "10", "--seed", "7", "--out"])
        .arg(&out)
        .output()
        .unwrap();
    assert!(output.status.success(), "{output:?}");
    let stdout = String::from_utf8(output.stdout).unwrap();
    assert!(stdout.contains("max error"));
    let csv = std::fs::read_to_string(&out).unwrap();
    let lines: Vec<&str> = csv.lines().collect();
    assert_eq!(lines.len(), 11); // header + 10 rows
    assert!(lines[0].starts_with("t,y_0,y_1,u_enc_0,u_enc_1,u_base_0,u_base_1,err_inf"));
}

#[test]
fn run_supports_scheme_override() {
    let dir = tempfile::tempdir().unwrap();
    let path = write_config(&dir, &small_config());
    let output = bin()
        .args(["run", "--config"])
        .arg(&path)
        .args(["--scheme", "bgv", "--steps", "5"])
        .output()
        .unwrap();
    assert!(output.status.success(), "{output:?}");
}

#[test]
fn check_params_prints_the_report() {
    let dir = tempfile::tempdir().unwrap();
    let path = write_config(&dir, &small_config());
    let output = bin()
        .args(["check-params", "--config"])
        .arg(&path)
        .output()
        .unwrap();
    assert!(output.status.success());
    let stdout = String::from_utf8(output.stdout).unwrap();
    assert!(stdout.contains("external-product noise bound"));
    assert!(stdout.contains("io overflow margin"));
    assert!(stdout.contains("overall: PASS"));
}

#[test]
fn convert_emits_integer_state_and_io_forms() {
    let dir = tempfile::tempdir().unwrap();
    let path = write_config(&dir, &small_config());
    let output = bin()
        .args(["convert", "--config"])
        .arg(&path)
        .output()
        .unwrap();
    assert!(output.status.success());
    let json: serde_json::Value =
        serde_json::from_slice(&output.stdout).expect("convert output must be JSON");
    assert!(json["reencrypted"]["f_bar"][0][0].is_i64());
    assert_eq!(json["io_form"]["h_u"].as_array().unwrap().len(), 4);
    assert_eq!(json["io_form"]["u_init"].as_array().unwrap().len(), 4);
}

#[test]
fn bench_reports_both_modes() {
    let dir = tempfile::tempdir().unwrap();
    let path = write_config(&dir, &small_config());
    let output = bin()
        .args(["bench", "--config"])
        .arg(&path)
        .args(["--steps", "4"])
        .output()
        .unwrap();
    assert!(output.status.success());
    let stdout = String::from_utf8(output.stdout).unwrap();
    assert!(stdout.contains("rgsw-packed"));
    assert!(stdout.contains("nopack/packed median ratio"));
}

#[test]
fn bad_invocations_exit_2() {
    let output = bin().arg("frobnicate").output().unwrap();
    assert_eq!(output.status.code(), Some(2));

    let output = bin()
        .args(["run", "--config", "/nonexistent/config.json"])
        .output()
        .unwrap();
    assert_eq!(output.status.code(), Some(2));

    // malformed config contents
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("broken.json");
    std::fs::write(&path, "{ not json").unwrap();
    let output = bin().args(["run", "--config"]).arg(&path).output().unwrap();
    assert_eq!(output.status.code(), Some(2));
}

#[test]
fn budget_refusal_exits_3() {
    let mut cfg = small_config();
    cfg.scheme = Scheme::Bgv;
    let bq = cfg.bgv_quantization.as_mut().unwrap();
    bq.r = 1e-6;
    bq.s = 1e-6;
    let dir = tempfile::tempdir().unwrap();
    let path = write_config(&dir, &cfg);
    let output = bin()
        .args(["run", "--config"])
        .arg(&path)
        .args(["--steps", "3"])
        .output()
        .unwrap();
    assert_eq!(output.status.code(), Some(3), "{output:?}");
    let stderr = String::from_utf8(output.stderr).unwrap();
    assert!(stderr.contains("budget refusal"));
}

#[test]
fn assert_flag_exits_4_on_breach() {
    let mut cfg = small_config();
    // scales coarse enough that the error ceilings cannot hold
    cfg.quantization.r = 5e-2;
    cfg.quantization.s = 5e-2;
    cfg.quantization.l = 5e-2;
    let dir = tempfile::tempdir().unwrap();
    let path = write_config(&dir, &cfg);
    let output = bin()
        .args(["run", "--config"])
        .arg(&path)
        .args(["--steps", "40", "--assert"])
        .output()
        .unwrap();
    assert_eq!(output.status.code(), Some(4), "{output:?}");
    let stderr = String::from_utf8(output.stderr).unwrap();
    assert!(stderr.contains("thresholds breached"));
}
