mod common;

use std::path::Path;
use std::process::{Command, Output};

use common::fixture_path;

fn hessflow(args: &[&str], out: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_hessflow"))
        .args(args)
        .arg("--out")
        .arg(out)
        .env("HESSFLOW_THREADS", "2")
        .output()
        .unwrap()
}

fn run(command: &str, fixture: &str, extra: &[&str], out: &Path) -> Output {
    let path = fixture_path(fixture);
    let mut args = vec![command, "--problem", path.to_str().unwrap()];
    args.extend_from_slice(extra);
    hessflow(&args, out)
}

fn report(out: &Path) -> serde_json::Value {
    serde_json::from_str(&std::fs::read_to_string(out.join("report.json")).unwrap()).unwrap()
}

#[test]
fn check_exit_codes() {
    let dir = tempfile::tempdir().unwrap();
    assert_eq!(run("check", "heat_torus", &[], dir.path()).status.code(), Some(0));
    assert_eq!(run("check", "fail_a4", &[], dir.path()).status.code(), Some(4));
    let r = report(dir.path());
    assert_eq!(r["exit_code"], 4);
    let failed: Vec<_> = r["assertions"].as_array().unwrap().iter().filter(|a| a["pass"] == false).collect();
    assert!(!failed.is_empty());
    let bad = run("check", "malformed", &[], dir.path());
    assert_eq!(bad.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&bad.stderr).contains("line"));
    assert_eq!(run("check", "no_such_fixture", &[], dir.path()).status.code(), Some(2));
}

#[test]
fn argument_errors_exit_two() {
    let dir = tempfile::tempdir().unwrap();
    assert_eq!(hessflow(&["frobnicate"], dir.path()).status.code(), Some(2));
    assert_eq!(run("check", "heat_torus", &["--grid", "8"], dir.path()).status.code(), Some(2));
    assert_eq!(run("audit", "heat_torus", &["--delta", "1.5"], dir.path()).status.code(), Some(2));
    let help = Command::new(env!("CARGO_BIN_EXE_hessflow")).arg("--help").output().unwrap();
    assert_eq!(help.status.code(), Some(0));
}

#[test]
fn solver_failure_exits_three() {
    let dir = tempfile::tempdir().unwrap();
    let text = std::fs::read_to_string(fixture_path("heat_torus")).unwrap().replace(
        "[solver]\ndt = 0.02",
        "[solver]\ndt = 0.02\nnewton_tol = 1e-300\nmax_newton = 1\nmax_halvings = 0",
    );
    let path = dir.path().join("stiff.toml");
    std::fs::write(&path, text).unwrap();
    let out = dir.path().join("out");
    let o = hessflow(&["solve", "--problem", path.to_str().unwrap()], &out);
    assert_eq!(o.status.code(), Some(3), "{}", String::from_utf8_lossy(&o.stderr));
    assert!(report(&out)["solver_error"].is_string());
}

#[test]
fn mms_needs_exact_solution() {
    let dir = tempfile::tempdir().unwrap();
    let text = std::fs::read_to_string(fixture_path("heat_torus")).unwrap().replace(
        "[exact]\nterms = [{ coeff = 1.0, k = [1.0, 1.0], decay = 2.0 }]",
        "",
    );
    let path = dir.path().join("no_exact.toml");
    std::fs::write(&path, text).unwrap();
    let o = hessflow(&["mms", "--problem", path.to_str().unwrap()], &dir.path().join("out"));
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn reports_are_deterministic_and_hash_overrides() {
    let a = tempfile::tempdir().unwrap();
    let b = tempfile::tempdir().unwrap();
    let c = tempfile::tempdir().unwrap();
    assert_eq!(run("audit", "ma_patch", &[], a.path()).status.code(), Some(0));
    assert_eq!(run("audit", "ma_patch", &[], b.path()).status.code(), Some(0));
    let ra = std::fs::read(a.path().join("report.json")).unwrap();
    let rb = std::fs::read(b.path().join("report.json")).unwrap();
    assert_eq!(ra, rb);
    assert_eq!(run("audit", "ma_patch", &["--seed", "12"], c.path()).status.code(), Some(0));
    let (ha, hc) = (report(a.path())["meta"]["config_hash"].clone(), report(c.path())["meta"]["config_hash"].clone());
    assert_ne!(ha, hc);
    assert!(report(a.path())["meta"].get("started").is_none());
    let t = tempfile::tempdir().unwrap();
    run("check", "ma_patch", &["--timestamps"], t.path());
    assert!(report(t.path())["meta"]["started"].is_u64());
}

#[test]
fn solve_writes_snapshots() {
    let dir = tempfile::tempdir().unwrap();
    assert_eq!(run("solve", "ma_patch", &["--snapshot-every", "4"], dir.path()).status.code(), Some(0));
    let mut snaps: Vec<_> = std::fs::read_dir(dir.path().join("snapshots"))
        .unwrap()
        .map(|e| e.unwrap().file_name().into_string().unwrap())
        .collect();
    snaps.sort();
    // 10 steps: states 0, 4, 8 and the last
    assert_eq!(snaps, ["u_00000.csv", "u_00004.csv", "u_00008.csv", "u_00010.csv"]);
    let text = std::fs::read_to_string(dir.path().join("snapshots/u_00000.csv")).unwrap();
    let mut lines = text.lines();
    assert_eq!(lines.next(), Some("x0,x1,t,u"));
    assert_eq!(lines.count(), 17 * 17);
}

#[test]
fn single_resolution_sweep_notes_missing_drift() {
    let dir = tempfile::tempdir().unwrap();
    let o = run("sweep", "disk_annulus", &["--refine", "1"], dir.path());
    assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
    let r = report(dir.path());
    let notes = r["notes"].to_string();
    assert!(notes.contains("drift unavailable: fewer than two resolutions"), "{notes}");
    let csv = std::fs::read_to_string(dir.path().join("sweep.csv")).unwrap();
    assert_eq!(
        csv.lines().next(),
        Some("scale,h,theta,min_gap,m_R_largest,tangential_max,c2_ratio,c1_ratio")
    );
}

#[test]
fn mms_command_writes_series() {
    let dir = tempfile::tempdir().unwrap();
    assert_eq!(run("mms", "heat_torus", &[], dir.path()).status.code(), Some(0));
    let csv = std::fs::read_to_string(dir.path().join("mms.csv")).unwrap();
    assert_eq!(csv.lines().count(), 1 + 3 + 3);
    assert_eq!(report(dir.path())["command"], "mms");
}
