//! Drives the `lmcf` binary and checks exit codes and outputs.

use std::path::Path;
use std::process::{Command, Output};

fn lmcf(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_lmcf"))
        .args(args)
        .env("LMCF_WORKERS", "2")
        .output()
        .expect("binary runs")
}

fn write(dir: &Path, name: &str, text: &str) -> String {
    let path = dir.join(name);
    std::fs::write(&path, text).unwrap();
    path.display().to_string()
}

fn manifest(dir: &Path) -> serde_json::Value {
    serde_json::from_str(&std::fs::read_to_string(dir.join("manifest.json")).unwrap()).unwrap()
}

#[test]
fn lawlor_run_succeeds() {
    let tmp = tempfile::tempdir().unwrap();
    let out = tmp.path().join("out");
    let cfg = write(
        tmp.path(),
        "l.toml",
        &format!(
            "scenario = \"lawlor\"\noutput_dir = \"{}\"\noutput_times = [0.0, 1.0]\n[lawlor]\ngrid_n = 60\nt_final = 1.0\n",
            out.display()
        ),
    );
    let o = lmcf(&["lawlor", "run", &cfg]);
    assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
    assert_eq!(manifest(&out)["termination"], "FinalTime");
    assert!(out.join("snapshots/snapshot_0001.csv").exists());
}

#[test]
fn output_dir_flag_overrides_config() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write(
        tmp.path(),
        "c.toml",
        "scenario = \"clifford\"\noutput_dir = \"/nonexistent/never\"\n[clifford]\ngrid_n = 40\nt_final = 0.5\n",
    );
    let out = tmp.path().join("here");
    let o = lmcf(&["clifford", "run", &cfg, "--output-dir", out.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
    assert!(out.join("run.csv").exists());
}

#[test]
fn invalid_alpha_exits_with_config_code() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write(tmp.path(), "bad.toml", "scenario = \"lawlor\"\n[lawlor]\nalpha = 1.6\n");
    let o = lmcf(&["lawlor", "run", &cfg]);
    assert_eq!(o.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&o.stderr).contains("line 3"));
}

#[test]
fn scenario_mismatch_is_a_config_error() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write(tmp.path(), "l.toml", "scenario = \"lawlor\"\n");
    assert_eq!(lmcf(&["clifford", "run", &cfg]).status.code(), Some(2));
}

#[test]
fn flow_error_exits_with_flow_code() {
    let tmp = tempfile::tempdir().unwrap();
    let out = tmp.path().join("out");
    let cfg = write(
        tmp.path(),
        "l.toml",
        &format!(
            "scenario = \"lawlor\"\noutput_dir = \"{}\"\n[lawlor]\ngrid_n = 40\n[stepper]\nmax_steps = 3\n",
            out.display()
        ),
    );
    let o = lmcf(&["lawlor", "run", &cfg]);
    assert_eq!(o.status.code(), Some(3));
    assert_eq!(manifest(&out)["termination"], "Error");
}

#[test]
fn frame_check_passes() {
    let tmp = tempfile::tempdir().unwrap();
    let out = tmp.path().join("fc");
    let o = lmcf(&[
        "frame-check",
        "--n",
        "3",
        "--alpha",
        "-0.5",
        "--trials",
        "200",
        "--seed",
        "5",
        "--output-dir",
        out.to_str().unwrap(),
    ]);
    assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
    let m = manifest(&out);
    assert!(m["final_diagnostics"]["max_residual"].as_f64().unwrap() < 1e-9);
}

#[test]
fn frame_check_rejects_n_below_two() {
    assert_eq!(lmcf(&["frame-check", "--n", "1"]).status.code(), Some(2));
}

#[test]
fn convergence_reports_orders() {
    let tmp = tempfile::tempdir().unwrap();
    let out = tmp.path().join("conv");
    let cfg = write(
        tmp.path(),
        "c.toml",
        &format!(
            "scenario = \"convergence\"\noutput_dir = \"{}\"\n[convergence]\nproblem = \"clifford\"\n",
            out.display()
        ),
    );
    let o = lmcf(&["convergence", &cfg]);
    assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
    let order = manifest(&out)["final_diagnostics"]["order_80_160"].as_f64().unwrap();
    assert!((1.9..=2.1).contains(&order), "{order}");
}

#[test]
fn sweep_marks_failures_and_exits_zero() {
    let tmp = tempfile::tempdir().unwrap();
    let out = tmp.path().join("sweep");
    let cfg = write(
        tmp.path(),
        "c.toml",
        &format!(
            "scenario = \"clifford\"\noutput_dir = \"{}\"\n[clifford]\ngrid_n = 40\nt_final = 0.5\n",
            out.display()
        ),
    );
    let o = lmcf(&["sweep", &cfg, "--param", "alpha", "--values=-0.2,1.8,0.2"]);
    assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
    let summary = std::fs::read_to_string(out.join("summary.csv")).unwrap();
    let status: Vec<&str> = summary.lines().skip(1).map(|l| l.split(',').nth(1).unwrap()).collect();
    assert_eq!(status, ["ok", "failed", "ok"]);
}

#[test]
fn empty_sweep_writes_header_only() {
    let tmp = tempfile::tempdir().unwrap();
    let out = tmp.path().join("sweep");
    let cfg = write(
        tmp.path(),
        "l.toml",
        &format!("scenario = \"lawlor\"\noutput_dir = \"{}\"\n", out.display()),
    );
    let o = lmcf(&["sweep", &cfg, "--param", "alpha", "--values", ""]);
    assert_eq!(o.status.code(), Some(0));
    let summary = std::fs::read_to_string(out.join("summary.csv")).unwrap();
    assert_eq!(summary.lines().count(), 1);
}

#[test]
fn missing_config_file_is_a_config_error() {
    assert_eq!(
        lmcf(&["lawlor", "run", "/definitely/not/here.toml"]).status.code(),
        Some(2)
    );
}

#[test]
fn shipped_configs_run() {
    let configs = Path::new(env!("CARGO_MANIFEST_DIR")).join("../../configs");
    let tmp = tempfile::tempdir().unwrap();
    let mut seen = 0;
    for entry in std::fs::read_dir(&configs).unwrap() {
        let path = entry.unwrap().path();
        let text = std::fs::read_to_string(&path).unwrap();
        let scenario = text
            .lines()
            .find_map(|l| l.strip_prefix("scenario = \""))
            .and_then(|r| r.strip_suffix('"'))
            .unwrap()
            .to_string();
        let out = tmp.path().join(path.file_stem().unwrap());
        let (cfg, out) = (path.to_str().unwrap(), out.to_str().unwrap());
        let o = match scenario.as_str() {
            "lawlor" | "clifford" => lmcf(&[&scenario, "run", cfg, "--output-dir", out]),
            "convergence" => lmcf(&["convergence", cfg, "--output-dir", out]),
            _ => lmcf(&["sweep", cfg, "--param", "seed", "--values", "0", "--output-dir", out]),
        };
        assert_eq!(
            o.status.code(),
            Some(0),
            "{}: {}",
            path.display(),
            String::from_utf8_lossy(&o.stderr)
        );
        seen += 1;
    }
    assert!(seen >= 5);
}
