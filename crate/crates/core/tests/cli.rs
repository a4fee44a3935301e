//! End-to-end exercises of the taxilim binary: exit codes, emitted files,
//! and the compare workflow.

use std::path::Path;
use std::process::{Command, Output};

const BIN: &str = env!("CARGO_BIN_EXE_taxilim");

fn taxilim(args: &[&str]) -> Output {
    Command::new(BIN).args(args).output().expect("binary runs")
}

fn write_cfg(dir: &Path, name: &str, text: &str) -> String {
    let path = dir.join(name);
    std::fs::write(&path, text).unwrap();
    path.to_str().unwrap().to_owned()
}

const SMALL_RUN: &str = "\
[model]
kind = competition
variant = indirect
[grid]
n = 32
[time]
t_end = 0.05
[params]
eps = 0.05
[ic]
family = cosine_perturbed_equilibrium
amplitude = 0.1
mode = 1
";

#[test]
fn run_writes_outputs_and_exits_zero() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_cfg(dir.path(), "run.cfg", SMALL_RUN);
    let out = dir.path().join("out");
    let res = taxilim(&["run", "--config", &cfg, "--out", out.to_str().unwrap(), "--quiet"]);
    assert!(res.status.success(), "stderr: {}", String::from_utf8_lossy(&res.stderr));
    for name in ["config.txt", "diagnostics.csv", "summary.txt", "snapshot_000000.csv"] {
        assert!(out.join(name).exists(), "missing {name}");
    }
    let summary = std::fs::read_to_string(out.join("summary.txt")).unwrap();
    assert!(summary.contains("status = ok"), "summary: {summary}");
}

#[test]
fn zero_horizon_run_snapshots_the_initial_state() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_cfg(
        dir.path(),
        "t0.cfg",
        &SMALL_RUN.replace("t_end = 0.05", "t_end = 0.0"),
    );
    let out = dir.path().join("out");
    let res = taxilim(&["run", "--config", &cfg, "--out", out.to_str().unwrap(), "--quiet"]);
    assert!(res.status.success());
    let snap = out.join("snapshot_000000.csv");
    assert!(snap.exists());
    // one snapshot only, and it compares clean against itself
    assert!(!out.join("snapshot_000001.csv").exists());
    let res = taxilim(&["compare", snap.to_str().unwrap(), snap.to_str().unwrap(), "--tol", "0"]);
    assert!(res.status.success());
    assert!(String::from_utf8_lossy(&res.stdout).contains("pass"));
}

#[test]
fn compare_flags_a_perturbed_snapshot_with_exit_one() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_cfg(dir.path(), "run.cfg", SMALL_RUN);
    let out = dir.path().join("out");
    assert!(taxilim(&["run", "--config", &cfg, "--out", out.to_str().unwrap(), "--quiet"])
        .status
        .success());
    let snap = out.join("snapshot_000000.csv");
    let text = std::fs::read_to_string(&snap).unwrap();
    // bump one data value a little past the tolerance
    let perturbed = {
        let mut lines: Vec<String> = text.lines().map(str::to_owned).collect();
        let i = lines.iter().position(|l| !l.starts_with('#') && l.contains(',')).unwrap() + 3;
        let mut parts: Vec<String> = lines[i].split(',').map(str::to_owned).collect();
        let last = parts.last_mut().unwrap();
        *last = format!("{:.16e}", last.parse::<f64>().unwrap() + 1e-6);
        lines[i] = parts.join(",");
        lines.join("\n") + "\n"
    };
    let bad = dir.path().join("perturbed.csv");
    std::fs::write(&bad, perturbed).unwrap();

    let res = taxilim(&["compare", snap.to_str().unwrap(), bad.to_str().unwrap(), "--tol", "1e-9"]);
    assert_eq!(res.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&res.stdout).contains("fail"));

    let res = taxilim(&["compare", snap.to_str().unwrap(), bad.to_str().unwrap(), "--tol", "1e-3"]);
    assert_eq!(res.status.code(), Some(0));
}

#[test]
fn bad_config_exits_two() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_cfg(dir.path(), "bad.cfg", "[model]\nkind = hyperbolic\n");
    let res = taxilim(&["run", "--config", &cfg, "--quiet"]);
    assert_eq!(res.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&res.stderr).contains("config"));
}

#[test]
fn missing_config_file_exits_five() {
    let res = taxilim(&["run", "--config", "/nonexistent/nowhere.cfg", "--quiet"]);
    assert_eq!(res.status.code(), Some(5));
}

#[test]
fn sweep_subcommand_requires_a_sweep_config() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_cfg(dir.path(), "run.cfg", SMALL_RUN);
    let res = taxilim(&["sweep", "--config", &cfg, "--quiet"]);
    assert_eq!(res.status.code(), Some(2));
}

#[test]
fn sweep_writes_report_with_fitted_orders() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_cfg(
        dir.path(),
        "sweep.cfg",
        "[model]\nkind = competition\n[grid]\nn = 32\n[time]\nt_end = 0.2\n\
         [ic]\nfamily = cosine_perturbed_equilibrium\namplitude = 0.1\nmode = 1\n\
         [sweep]\neps = [1e-1, 1e-2, 1e-3]\n",
    );
    let out = dir.path().join("out");
    let res = taxilim(&["sweep", "--config", &cfg, "--out", out.to_str().unwrap(), "--quiet"]);
    assert!(res.status.success(), "stderr: {}", String::from_utf8_lossy(&res.stderr));
    let report = std::fs::read_to_string(out.join("sweep_report.csv")).unwrap();
    assert_eq!(report.lines().count(), 4); // header + one row per eps
    let summary = std::fs::read_to_string(out.join("summary.txt")).unwrap();
    assert!(summary.contains("order_sup_t_l2_u"));
}

#[test]
fn mms_subcommand_reports_orders() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_cfg(
        dir.path(),
        "mms.cfg",
        "[model]\nkind = competition\n[grid]\nn = 32\n[time]\nt_end = 0.05\ndt_max = 2e-3\n\
         [params]\nchi = 0.1\n[mms]\nenabled = true\nlevels = 2\n",
    );
    let out = dir.path().join("out");
    let res = taxilim(&["mms", "--config", &cfg, "--out", out.to_str().unwrap(), "--quiet"]);
    assert!(res.status.success(), "stderr: {}", String::from_utf8_lossy(&res.stderr));
    let report = std::fs::read_to_string(out.join("mms_report.csv")).unwrap();
    assert_eq!(report.lines().count(), 3);
}
