use std::ffi::{CStr, CString};
use std::ptr;

use hessflow_ffi::*;

fn fixture(name: &str) -> CString {
    let path = format!("{}/../core/fixtures/{name}.toml", env!("CARGO_MANIFEST_DIR"));
    CString::new(std::fs::read_to_string(path).unwrap()).unwrap()
}

fn last_error() -> String {
    let p = hf_last_error();
    assert!(!p.is_null());
    unsafe { CStr::from_ptr(p) }.to_str().unwrap().to_string()
}

fn take_string(p: *mut std::ffi::c_char) -> String {
    let s = unsafe { CStr::from_ptr(p) }.to_str().unwrap().to_string();
    unsafe { hf_string_free(p) };
    s
}

#[test]
fn solve_and_audit_ma_patch() {
    let text = fixture("ma_patch");
    let mut prob = ptr::null_mut();
    assert_eq!(unsafe { hf_problem_from_toml(text.as_ptr(), &mut prob) }, HfStatus::Ok);
    let mut nodes = 0;
    assert_eq!(unsafe { hf_problem_node_count(prob, &mut nodes) }, HfStatus::Ok);
    assert_eq!(nodes, 17 * 17);

    let mut json = ptr::null_mut();
    assert_eq!(unsafe { hf_check_json(prob, &mut json) }, HfStatus::Ok);
    let check: serde_json::Value = serde_json::from_str(&take_string(json)).unwrap();
    assert_eq!(check["passed"], true);

    let mut traj = ptr::null_mut();
    assert_eq!(unsafe { hf_solve(prob, &mut traj) }, HfStatus::Ok);
    let mut len = 0;
    assert_eq!(unsafe { hf_trajectory_len(traj, &mut len) }, HfStatus::Ok);
    assert!(len >= 2);
    let mut buf = vec![0.0; nodes];
    let mut t = 0.0;
    assert_eq!(unsafe { hf_trajectory_state(traj, len - 1, buf.as_mut_ptr(), nodes, &mut t) }, HfStatus::Ok);
    assert!((t - 0.5).abs() < 1e-12);
    // exact solution |x|²/2 + t/2 at the corner (−1, −1)
    assert!((buf[0] - (1.0 + 0.5 * t)).abs() < 1e-9);
    assert_eq!(unsafe { hf_trajectory_state(traj, len, buf.as_mut_ptr(), nodes, &mut t) }, HfStatus::OutOfRange);
    assert_eq!(unsafe { hf_trajectory_state(traj, 0, buf.as_mut_ptr(), nodes - 1, &mut t) }, HfStatus::OutOfRange);

    let mut json = ptr::null_mut();
    assert_eq!(unsafe { hf_audit_json(prob, traj, &mut json) }, HfStatus::Ok);
    let audit: serde_json::Value = serde_json::from_str(&take_string(json)).unwrap();
    assert_eq!(audit["passed"], true);
    assert!(audit["audit"]["barrier"][0]["audit"]["theta"].as_f64().unwrap() > 0.0);

    unsafe {
        hf_trajectory_free(traj);
        hf_problem_free(prob);
    }
}

#[test]
fn failing_hypothesis_reports_audit_status() {
    let text = fixture("fail_a4");
    let mut prob = ptr::null_mut();
    assert_eq!(unsafe { hf_problem_from_toml(text.as_ptr(), &mut prob) }, HfStatus::Ok);
    let mut json = ptr::null_mut();
    assert_eq!(unsafe { hf_check_json(prob, &mut json) }, HfStatus::Audit);
    assert!(!json.is_null());
    let check: serde_json::Value = serde_json::from_str(&take_string(json)).unwrap();
    assert_eq!(check["passed"], false);
    unsafe { hf_problem_free(prob) };
}

#[test]
fn errors_are_codes_with_messages() {
    let text = fixture("malformed");
    let mut prob = ptr::null_mut();
    assert_eq!(unsafe { hf_problem_from_toml(text.as_ptr(), &mut prob) }, HfStatus::Config);
    assert!(prob.is_null());
    assert!(last_error().contains("line"));

    assert_eq!(unsafe { hf_problem_from_toml(ptr::null(), &mut prob) }, HfStatus::NullPointer);
    let bad = [0xffu8, 0];
    assert_eq!(unsafe { hf_problem_from_toml(bad.as_ptr().cast(), &mut prob) }, HfStatus::InvalidUtf8);
    let mut n = 0;
    assert_eq!(unsafe { hf_problem_node_count(ptr::null(), &mut n) }, HfStatus::NullPointer);
    unsafe {
        hf_problem_free(ptr::null_mut());
        hf_trajectory_free(ptr::null_mut());
        hf_string_free(ptr::null_mut());
    }
}

#[test]
fn version_is_nul_terminated() {
    let v = unsafe { CStr::from_ptr(hf_version()) }.to_str().unwrap();
    assert_eq!(v, env!("CARGO_PKG_VERSION"));
}

#[test]
fn header_declares_the_api() {
    let header = std::fs::read_to_string(format!("{}/include/hessflow.h", env!("CARGO_MANIFEST_DIR"))).unwrap();
    for name in [
        "hf_problem_from_toml",
        "hf_problem_free",
        "hf_solve",
        "hf_trajectory_state",
        "hf_audit_json",
        "hf_check_json",
        "hf_string_free",
        "hf_last_error",
        "HF_STATUS_OK",
        "typedef struct HfProblem HfProblem",
    ] {
        assert!(header.contains(name), "header lacks {name}");
    }
}
