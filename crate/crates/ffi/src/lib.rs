//! C interface to the solver and audits.
//!
//! Handles are opaque and owned by the caller, who releases them with the
//! matching `*_free`. Every fallible call returns an [`HfStatus`]; the message
//! of the last failure on the calling thread is available from
//! [`hf_last_error`]. Strings returned through out-parameters are released
//! with [`hf_string_free`].

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::ptr;

use hessflow::cli::commands::{audit_bundle, Run};
use hessflow::cli::config::ProblemFile;
use hessflow::operator::{verify_problem, ProblemSpec};
use hessflow::solver::{solve_ibvp, Trajectory};
use hessflow::symfunc::{verify_structure_with, StructureOptions};

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum HfStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidUtf8 = 2,
    Config = 3,
    Solver = 4,
    Audit = 5,
    OutOfRange = 6,
    Panic = 7,
}

/// A validated problem at its base resolution.
pub struct HfProblem {
    file: ProblemFile,
    spec: ProblemSpec,
}

/// A solved trajectory.
pub struct HfTrajectory {
    traj: Trajectory,
}

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

fn set_error(msg: impl Into<String>) {
    let text = msg.into().replace('\0', " ");
    LAST_ERROR.with(|e| *e.borrow_mut() = CString::new(text).ok());
}

fn guard(f: impl FnOnce() -> Result<(), (HfStatus, String)>) -> HfStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => HfStatus::Ok,
        Ok(Err((status, msg))) => {
            set_error(msg);
            status
        }
        Err(_) => {
            set_error("internal panic");
            HfStatus::Panic
        }
    }
}

unsafe fn read_str<'a>(s: *const c_char) -> Result<&'a str, (HfStatus, String)> {
    if s.is_null() {
        return Err((HfStatus::NullPointer, "null string".into()));
    }
    CStr::from_ptr(s)
        .to_str()
        .map_err(|_| (HfStatus::InvalidUtf8, "string is not valid UTF-8".into()))
}

unsafe fn write_string(out: *mut *mut c_char, s: String) -> Result<(), (HfStatus, String)> {
    if out.is_null() {
        return Err((HfStatus::NullPointer, "null output pointer".into()));
    }
    let c = CString::new(s).map_err(|_| (HfStatus::Panic, "string contains NUL".into()))?;
    *out = c.into_raw();
    Ok(())
}

fn null(what: &str) -> (HfStatus, String) {
    (HfStatus::NullPointer, format!("null {what}"))
}

/// Library version as a static NUL-terminated string.
#[no_mangle]
pub extern "C" fn hf_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr().cast()
}

/// Message of the last failed call on this thread, or null. Valid until the
/// next failing call on the same thread.
#[no_mangle]
pub extern "C" fn hf_last_error() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ref().map_or(ptr::null(), |c| c.as_ptr()))
}

/// Parses and validates a problem file given as TOML text.
///
/// # Safety
/// `toml` must be a NUL-terminated string and `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn hf_problem_from_toml(toml: *const c_char, out: *mut *mut HfProblem) -> HfStatus {
    guard(|| {
        let text = read_str(toml)?;
        if out.is_null() {
            return Err(null("output pointer"));
        }
        let file = ProblemFile::parse(text).map_err(|e| (HfStatus::Config, e.to_string()))?;
        let spec = file.problem(1).map_err(|e| (HfStatus::Config, e.to_string()))?;
        *out = Box::into_raw(Box::new(HfProblem { file, spec }));
        Ok(())
    })
}

/// # Safety
/// `p` must come from [`hf_problem_from_toml`] and not be used afterwards.
#[no_mangle]
pub unsafe extern "C" fn hf_problem_free(p: *mut HfProblem) {
    if !p.is_null() {
        drop(Box::from_raw(p));
    }
}

/// Number of grid nodes, i.e. the length of every state.
///
/// # Safety
/// `p` must be a live problem handle and `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn hf_problem_node_count(p: *const HfProblem, out: *mut usize) -> HfStatus {
    guard(|| {
        let p = p.as_ref().ok_or_else(|| null("problem"))?;
        let out = out.as_mut().ok_or_else(|| null("output pointer"))?;
        *out = p.spec.geo.len();
        Ok(())
    })
}

/// Structure and hypothesis checks as a JSON object. Returns
/// [`HfStatus::Audit`] (with the JSON still written) when an asserted
/// condition fails.
///
/// # Safety
/// `p` must be a live problem handle and `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn hf_check_json(p: *const HfProblem, out: *mut *mut c_char) -> HfStatus {
    let mut passed = true;
    let status = guard(|| {
        let p = p.as_ref().ok_or_else(|| null("problem"))?;
        let audit = &p.file.audit;
        let opts = StructureOptions { f6_threshold: audit.f6_threshold, ..StructureOptions::default() };
        let structure = verify_structure_with(&p.spec.op, audit.samples, audit.seed, &opts);
        let hypotheses = verify_problem(&p.spec, audit.samples, audit.seed);
        passed = structure.passed() && hypotheses.passed();
        let json = serde_json::json!({ "structure": structure, "problem": hypotheses, "passed": passed });
        write_string(out, json.to_string())
    });
    if status == HfStatus::Ok && !passed {
        set_error("an asserted condition failed");
        return HfStatus::Audit;
    }
    status
}

/// Solves the problem with its own solver settings.
///
/// # Safety
/// `p` must be a live problem handle and `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn hf_solve(p: *const HfProblem, out: *mut *mut HfTrajectory) -> HfStatus {
    guard(|| {
        let p = p.as_ref().ok_or_else(|| null("problem"))?;
        if out.is_null() {
            return Err(null("output pointer"));
        }
        let traj = solve_ibvp(&p.spec, &p.file.solver).map_err(|f| (HfStatus::Solver, f.to_string()))?;
        *out = Box::into_raw(Box::new(HfTrajectory { traj }));
        Ok(())
    })
}

/// # Safety
/// `t` must come from [`hf_solve`] and not be used afterwards.
#[no_mangle]
pub unsafe extern "C" fn hf_trajectory_free(t: *mut HfTrajectory) {
    if !t.is_null() {
        drop(Box::from_raw(t));
    }
}

/// Number of stored states (initial state included).
///
/// # Safety
/// `t` must be a live trajectory handle and `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn hf_trajectory_len(t: *const HfTrajectory, out: *mut usize) -> HfStatus {
    guard(|| {
        let t = t.as_ref().ok_or_else(|| null("trajectory"))?;
        *out.as_mut().ok_or_else(|| null("output pointer"))? = t.traj.len();
        Ok(())
    })
}

/// Copies stored state `index` into `buf` of length `len`, and its time into `time`.
///
/// # Safety
/// `t` must be a live trajectory handle, `buf` must hold `len` doubles and
/// `time` must be a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn hf_trajectory_state(
    t: *const HfTrajectory,
    index: usize,
    buf: *mut f64,
    len: usize,
    time: *mut f64,
) -> HfStatus {
    guard(|| {
        let t = t.as_ref().ok_or_else(|| null("trajectory"))?;
        if buf.is_null() || time.is_null() {
            return Err(null("output buffer"));
        }
        let state = t
            .traj
            .states
            .get(index)
            .ok_or_else(|| (HfStatus::OutOfRange, format!("state {index} of {}", t.traj.len())))?;
        if len != state.len() {
            return Err((HfStatus::OutOfRange, format!("buffer holds {len} values, state has {}", state.len())));
        }
        std::slice::from_raw_parts_mut(buf, len).copy_from_slice(state);
        *time = t.traj.times[index];
        Ok(())
    })
}

/// Barrier, test-function, boundary and ratio audits of one trajectory as
/// JSON. Returns [`HfStatus::Audit`] (with the JSON still written) when an
/// audit assertion fails.
///
/// # Safety
/// `p` and `t` must be live handles with `t` solved from `p`, and `out` a
/// valid pointer.
#[no_mangle]
pub unsafe extern "C" fn hf_audit_json(p: *const HfProblem, t: *const HfTrajectory, out: *mut *mut c_char) -> HfStatus {
    let mut passed = true;
    let status = guard(|| {
        let p = p.as_ref().ok_or_else(|| null("problem"))?;
        let t = t.as_ref().ok_or_else(|| null("trajectory"))?;
        if t.traj.states.first().map(Vec::len) != Some(p.spec.geo.len()) {
            return Err((HfStatus::Audit, "trajectory does not match the problem grid".into()));
        }
        let runs = [Run { scale: 1, problem: p.spec.clone(), traj: t.traj.clone() }];
        let (bundle, assertions) = audit_bundle(&p.file, &runs).map_err(|e| (HfStatus::Audit, e.to_string()))?;
        passed = assertions.iter().all(|a| a.pass);
        let json = serde_json::json!({ "audit": bundle, "assertions": assertions, "passed": passed });
        write_string(out, json.to_string())
    });
    if status == HfStatus::Ok && !passed {
        set_error("an audit assertion failed");
        return HfStatus::Audit;
    }
    status
}

/// # Safety
/// `s` must come from this library and not be used afterwards.
#[no_mangle]
pub unsafe extern "C" fn hf_string_free(s: *mut c_char) {
    if !s.is_null() {
        drop(CString::from_raw(s));
    }
}
