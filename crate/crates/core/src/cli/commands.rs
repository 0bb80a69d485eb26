//! The five commands. Each returns a [`Report`] and writes it with any CSV
//! series into the output directory.

use serde::Serialize;
use serde_json::{json, Value};

use super::config::{config_hash, ConfigError, ProblemFile};
use super::output::{ensure_dir, snapshot_csv, table_csv, unix_now, write_json, write_text, Assertion, Meta, Report, REPORT_SCHEMA};
use super::{CliError, CommandKind, RunConfig};
use crate::estimates::{
    barrier_gap, boundary_mr, psi_barrier_search, ratio_report, tangential_identity_residual, test_function_w,
    BarrierAudit, BoundaryAudit, RatioReport, TangentialResidual, TestFunctionState, NORM_CONVENTION,
};
use crate::operator::{verify_problem, OperatorError, ProblemSpec};
use crate::solver::mms::log_log_slope;
use crate::solver::{mms_convergence, solve_ibvp, Trajectory};
use crate::symfunc::{verify_structure_with, StructureOptions};

/// What a command produced before it is wrapped into a report.
#[derive(Debug, Default)]
pub struct Outcome {
    pub payload: Value,
    pub assertions: Vec<Assertion>,
    pub solver_error: Option<String>,
    pub notes: Vec<String>,
    /// `(relative path, contents)` written next to the report.
    pub files: Vec<(String, String)>,
}

fn to_value<T: Serialize>(v: &T) -> Value {
    serde_json::to_value(v).unwrap_or(Value::Null)
}

fn invalid(field: &str, message: impl Into<String>) -> ConfigError {
    ConfigError::Validation { field: field.into(), message: message.into() }
}

/// Loads, overrides and validates the problem, runs the command and writes
/// `report.json`.
pub fn execute(config: &RunConfig) -> Result<Report, CliError> {
    let started = config.timestamps.then(unix_now);
    let (mut file, text) = ProblemFile::load(&config.problem_path)?;
    config.overrides.apply(&mut file)?;
    validate_audit(&file)?;
    // Fail on construction errors before any computation.
    file.problem(1)?;
    let outcome = match config.command {
        CommandKind::Check => cmd_check(&file)?,
        CommandKind::Solve => cmd_solve(&file, config.overrides.snapshot_every)?,
        CommandKind::Mms => cmd_mms(&file)?,
        CommandKind::Audit => cmd_audit(&file)?,
        CommandKind::Sweep => cmd_sweep(&file)?,
    };
    ensure_dir(&config.out)?;
    let mut outputs = Vec::new();
    for (name, contents) in &outcome.files {
        write_text(&config.out.join(name), contents)?;
        outputs.push(name.clone());
    }
    outputs.push("report.json".into());
    let exit_code = Report::exit_code_for(&outcome.assertions, outcome.solver_error.is_some());
    let report = Report {
        schema: REPORT_SCHEMA,
        command: config.command,
        meta: Meta {
            tool: "hessflow".into(),
            version: env!("CARGO_PKG_VERSION").into(),
            problem: file.name.clone(),
            problem_path: config.problem_path.display().to_string(),
            config_hash: config_hash(&text, &config.overrides.canonical()),
            seed: file.audit.seed,
            overrides: to_value(&config.overrides),
            started,
            finished: config.timestamps.then(unix_now),
        },
        exit_code,
        assertions: outcome.assertions,
        solver_error: outcome.solver_error,
        outputs,
        notes: outcome.notes,
        payload: outcome.payload,
    };
    write_json(&config.out.join("report.json"), &report)?;
    Ok(report)
}

fn validate_audit(file: &ProblemFile) -> Result<(), ConfigError> {
    let a = &file.audit;
    if !(a.delta > 0.0 && a.delta < 1.0) {
        return Err(invalid("audit.delta", format!("need 0 < delta < 1, got {}", a.delta)));
    }
    if let Some(b) = a.b {
        if !(b >= 1.0) {
            return Err(invalid("audit.b", format!("need b >= 1, got {b}")));
        }
    }
    if a.refinement.is_empty() || a.refinement.contains(&0) {
        return Err(invalid("audit.refinement", "refinement factors must be positive"));
    }
    if a.samples == 0 {
        return Err(invalid("audit.samples", "must be positive"));
    }
    Ok(())
}

fn records_assertion(id: &str, records: &[crate::report::ConditionRecord]) -> Assertion {
    let failed: Vec<String> = records
        .iter()
        .filter(|r| !r.ok())
        .map(|r| format!("{} (margin {:e})", r.id, r.worst_margin))
        .collect();
    let detail = if failed.is_empty() { "all asserted records pass".to_string() } else { format!("failed: {}", failed.join(", ")) };
    Assertion::new(id, failed.is_empty(), detail)
}

pub fn cmd_check(file: &ProblemFile) -> Result<Outcome, CliError> {
    let problem = file.problem(1)?;
    let opts = StructureOptions { f6_threshold: file.audit.f6_threshold, ..StructureOptions::default() };
    let structure = verify_structure_with(&problem.op, file.audit.samples, file.audit.seed, &opts);
    let hypotheses = verify_problem(&problem, file.audit.samples, file.audit.seed);
    Ok(Outcome {
        assertions: vec![
            records_assertion("structure", &structure.records),
            records_assertion("problem", &hypotheses.records),
        ],
        payload: json!({ "structure": structure, "problem": hypotheses }),
        notes: hypotheses.notes.clone(),
        ..Outcome::default()
    })
}

#[derive(Debug, Clone, Serialize)]
pub struct TrajectorySummary {
    pub steps: usize,
    pub final_time: f64,
    pub horizon: f64,
    pub max_newton_iterations: usize,
    pub max_residual: f64,
    pub min_margin: f64,
    pub trajectory: Trajectory,
}

impl TrajectorySummary {
    pub fn new(problem: &ProblemSpec, traj: &Trajectory) -> Self {
        Self {
            steps: traj.len().saturating_sub(1),
            final_time: traj.times.last().copied().unwrap_or(0.0),
            horizon: problem.horizon,
            max_newton_iterations: traj.max_newton_iterations(),
            max_residual: traj.max_residual(),
            min_margin: traj.min_margin(),
            trajectory: traj.clone(),
        }
    }
}

pub fn cmd_solve(file: &ProblemFile, snapshot_every: Option<usize>) -> Result<Outcome, CliError> {
    let problem = file.problem(1)?;
    let (traj, solver_error) = match solve_ibvp(&problem, &file.solver) {
        Ok(t) => (t, None),
        Err(f) => (f.partial, Some(f.error.to_string())),
    };
    let mut files = Vec::new();
    let last = traj.len().saturating_sub(1);
    for (m, u) in traj.states.iter().enumerate() {
        let keep = m == 0 || m == last || snapshot_every.is_some_and(|k| m % k == 0);
        if keep {
            files.push((format!("snapshots/u_{m:05}.csv"), snapshot_csv(&problem.geo.grid, traj.times[m], u)));
        }
    }
    let summary = TrajectorySummary::new(&problem, &traj);
    let mut assertions = Vec::new();
    if solver_error.is_none() {
        assertions.push(Assertion::new(
            "admissible",
            summary.min_margin >= file.solver.margin,
            format!("min cone margin over states and accepted iterates {:e}", summary.min_margin),
        ));
    }
    Ok(Outcome {
        payload: to_value(&summary),
        assertions,
        solver_error,
        files,
        ..Outcome::default()
    })
}

fn family(file: &ProblemFile) -> impl Fn(usize) -> Result<ProblemSpec, OperatorError> + '_ {
    move |s| file.problem(s).map_err(|e| OperatorError::Validation(e.to_string()))
}

pub fn cmd_mms(file: &ProblemFile) -> Result<Outcome, CliError> {
    if file.exact.is_none() {
        return Err(invalid("exact", "mms needs an exact solution").into());
    }
    let report = match mms_convergence(family(file), &file.audit.mms, &file.solver) {
        Ok(r) => r,
        Err(e) => {
            return Ok(Outcome {
                payload: Value::Null,
                solver_error: Some(e.to_string()),
                ..Outcome::default()
            })
        }
    };
    let row = |ladder: &str, s: &crate::solver::mms::ErrorSample| {
        vec![
            ladder.to_string(),
            s.scale.to_string(),
            format!("{:.17e}", s.h),
            format!("{:.17e}", s.dt),
            s.steps.to_string(),
            format!("{:.17e}", s.error),
        ]
    };
    let rows: Vec<Vec<String>> = report
        .spatial
        .iter()
        .map(|s| row("spatial", s))
        .chain(report.temporal.iter().map(|s| row("temporal", s)))
        .collect();
    let assertions = vec![Assertion::new(
        "reliable",
        report.reliable,
        format!("spatial rate {:?}, temporal rate {:?}", report.spatial_rate, report.temporal_rate),
    )];
    Ok(Outcome {
        files: vec![("mms.csv".into(), table_csv(&["ladder", "scale", "h", "dt", "steps", "error"], &rows))],
        notes: report.notes.clone(),
        payload: to_value(&report),
        assertions,
        ..Outcome::default()
    })
}

/// A solved refinement level.
pub struct Run {
    pub scale: usize,
    pub problem: ProblemSpec,
    pub traj: Trajectory,
}

/// Solves at every refinement factor, coarse to fine.
pub fn solve_ladder(file: &ProblemFile, scales: &[usize]) -> Result<Result<Vec<Run>, String>, CliError> {
    let mut scales = scales.to_vec();
    scales.sort_unstable();
    scales.dedup();
    let mut runs = Vec::with_capacity(scales.len());
    for s in scales {
        let problem = file.problem(s)?;
        match solve_ibvp(&problem, &file.solver) {
            Ok(traj) => runs.push(Run { scale: s, problem, traj }),
            Err(f) => return Ok(Err(format!("refinement {s}: {}", f.error))),
        }
    }
    Ok(Ok(runs))
}

#[derive(Debug, Clone, Serialize)]
pub struct BarrierAttempt {
    pub scale: usize,
    pub audit: Option<BarrierAudit>,
    pub error: Option<String>,
}

#[derive(Debug, Clone, Serialize)]
pub struct AuditBundle {
    pub norm: String,
    pub scales: Vec<usize>,
    /// Coarse to fine; later entries are refinement retries.
    pub barrier: Vec<BarrierAttempt>,
    pub test_function: Option<TestFunctionState>,
    pub boundary: Option<BoundaryAudit>,
    /// `(scale, residual)` per level.
    pub tangential: Vec<(usize, TangentialResidual)>,
    pub tangential_rate: Option<f64>,
    pub ratio: RatioReport,
    pub notes: Vec<String>,
}

fn barrier_attempt(run: &Run) -> BarrierAttempt {
    match barrier_gap(&run.problem, &run.traj) {
        Ok(a) => BarrierAttempt { scale: run.scale, audit: Some(a), error: None },
        Err(e) => BarrierAttempt { scale: run.scale, audit: None, error: Some(e.to_string()) },
    }
}

fn barrier_assertion(attempt: &BarrierAttempt, tol: f64) -> Assertion {
    match (&attempt.audit, &attempt.error) {
        (Some(a), _) => Assertion::new(
            "barrier_gap",
            a.passed(tol),
            format!("scale {}: theta {:e}, min gap {:e} at node {} t = {}", attempt.scale, a.theta, a.min_gap, a.argmin.0, a.argmin.1),
        ),
        (None, e) => Assertion::new("barrier_gap", false, format!("scale {}: {}", attempt.scale, e.clone().unwrap_or_default())),
    }
}

/// Every audit over a solved ladder, with the assertions `audit` makes.
pub fn audit_bundle(file: &ProblemFile, runs: &[Run]) -> Result<(AuditBundle, Vec<Assertion>), CliError> {
    let audit = &file.audit;
    let mut notes = Vec::new();
    let mut assertions = Vec::new();

    let mut barrier = Vec::new();
    for run in runs {
        let attempt = barrier_attempt(run);
        let passed = attempt.audit.as_ref().is_some_and(|a| a.passed(audit.gap_tol));
        barrier.push(attempt);
        if passed {
            break;
        }
        if barrier.len() < runs.len() {
            notes.push(format!("barrier gap failed at refinement {}; retrying on the next level", run.scale));
        }
    }
    if let Some(last) = barrier.last() {
        assertions.push(barrier_assertion(last, audit.gap_tol));
    }

    let base = &runs[0];
    let test_function = match test_function_w(&base.problem, &base.traj, audit.delta, audit.b) {
        Ok(w) => Some(w),
        Err(e) => {
            notes.push(format!("test function: {e}"));
            None
        }
    };

    let mut boundary = None;
    let mut tangential = Vec::new();
    let mut tangential_rate = None;
    if base.problem.geo.grid.has_boundary() {
        let mut b = boundary_mr(&base.problem, &base.traj, &audit.r_ladder).map_err(|e| CliError::Output(e.to_string()))?;
        assertions.push(Assertion::new(
            "m_R_monotone",
            b.monotone,
            format!("first R with m_R > 0: {:?}", b.first_positive),
        ));
        if let Some(phi) = &b.phi {
            match psi_barrier_search(&base.problem, &base.traj, phi.x0, phi.t0, &audit.psi_barrier) {
                Ok(r) => b.psi_barrier = Some(r),
                Err(e) => notes.push(format!("barrier search: {e}")),
            }
        }
        if base.problem.sub_matches_boundary {
            for run in runs {
                match tangential_identity_residual(&run.problem, &run.traj) {
                    Ok(t) => tangential.push((run.scale, t)),
                    Err(e) => notes.push(format!("tangential identity at refinement {}: {e}", run.scale)),
                }
            }
            if tangential.len() >= 2 && tangential.iter().all(|(_, t)| t.max > 0.0) {
                let h: Vec<f64> = tangential.iter().map(|(_, t)| t.h).collect();
                let r: Vec<f64> = tangential.iter().map(|(_, t)| t.max).collect();
                tangential_rate = Some(log_log_slope(&h, &r));
            }
            b.tangential = tangential.last().map(|(_, t)| t.clone());
        } else {
            notes.push("tangential identity skipped: sub differs from phi on the boundary".into());
        }
        boundary = Some(b);
    } else {
        notes.push("no boundary: boundary audits not applicable".into());
    }

    let pairs: Vec<(&ProblemSpec, &Trajectory)> = runs.iter().map(|r| (&r.problem, &r.traj)).collect();
    let ratio = ratio_report(&pairs).map_err(|e| CliError::Output(e.to_string()))?;
    assertions.push(Assertion::new("ratio_finite", ratio.finite(), "C2 and C1 ratios finite at every level"));
    match ratio.drift_within(audit.drift_tol) {
        Some(ok) => assertions.push(Assertion::new(
            "ratio_drift",
            ok,
            format!("C2 drift {:?}, C1 drift {:?}, tolerance {}", ratio.c2_drift, ratio.c1_drift, audit.drift_tol),
        )),
        None => notes.push("drift unavailable".into()),
    }

    Ok((
        AuditBundle {
            norm: NORM_CONVENTION.into(),
            scales: runs.iter().map(|r| r.scale).collect(),
            barrier,
            test_function,
            boundary,
            tangential,
            tangential_rate,
            ratio,
            notes,
        },
        assertions,
    ))
}

pub fn cmd_audit(file: &ProblemFile) -> Result<Outcome, CliError> {
    let runs = match solve_ladder(file, &file.audit.refinement)? {
        Ok(r) => r,
        Err(e) => return Ok(Outcome { payload: Value::Null, solver_error: Some(e), ..Outcome::default() }),
    };
    let (bundle, assertions) = audit_bundle(file, &runs)?;
    Ok(Outcome {
        notes: bundle.notes.clone(),
        payload: to_value(&bundle),
        assertions,
        ..Outcome::default()
    })
}

#[derive(Debug, Clone, Serialize)]
pub struct SweepRow {
    pub scale: usize,
    pub nodes: Vec<usize>,
    pub h: f64,
    pub theta: Option<f64>,
    pub min_gap: Option<f64>,
    pub m_r_largest: Option<f64>,
    pub monotone: Option<bool>,
    pub tangential_max: Option<f64>,
    pub c2_ratio: f64,
    pub c1_ratio: f64,
}

fn opt(v: Option<f64>) -> String {
    v.map_or_else(String::new, |x| format!("{x:.17e}"))
}

pub fn cmd_sweep(file: &ProblemFile) -> Result<Outcome, CliError> {
    let runs = match solve_ladder(file, &file.audit.refinement)? {
        Ok(r) => r,
        Err(e) => return Ok(Outcome { payload: Value::Null, solver_error: Some(e), ..Outcome::default() }),
    };
    let audit = &file.audit;
    let pairs: Vec<(&ProblemSpec, &Trajectory)> = runs.iter().map(|r| (&r.problem, &r.traj)).collect();
    let ratio = ratio_report(&pairs).map_err(|e| CliError::Output(e.to_string()))?;
    let mut rows = Vec::new();
    let mut assertions = Vec::new();
    let mut notes = ratio.notes.clone();
    let mut last_barrier = None;
    for (run, level) in runs.iter().zip(&ratio.history) {
        let attempt = barrier_attempt(run);
        let bnd = if run.problem.geo.grid.has_boundary() {
            boundary_mr(&run.problem, &run.traj, &audit.r_ladder).ok()
        } else {
            None
        };
        if let Some(b) = &bnd {
            assertions.push(Assertion::new(&format!("m_R_monotone@{}", run.scale), b.monotone, "m_R along the ladder"));
        }
        let tangential = (run.problem.geo.grid.has_boundary() && run.problem.sub_matches_boundary)
            .then(|| tangential_identity_residual(&run.problem, &run.traj).ok().map(|t| t.max))
            .flatten();
        rows.push(SweepRow {
            scale: run.scale,
            nodes: level.nodes.clone(),
            h: level.h,
            theta: attempt.audit.as_ref().map(|a| a.theta),
            min_gap: attempt.audit.as_ref().map(|a| a.min_gap),
            m_r_largest: bnd.as_ref().and_then(|b| b.largest_valid()).and_then(|r| r.m_r),
            monotone: bnd.as_ref().map(|b| b.monotone),
            tangential_max: tangential,
            c2_ratio: level.c2_ratio,
            c1_ratio: level.c1_ratio,
        });
        last_barrier = Some(attempt);
    }
    if let Some(b) = &last_barrier {
        assertions.push(barrier_assertion(b, audit.gap_tol));
    }
    assertions.push(Assertion::new("ratio_finite", ratio.finite(), "C2 and C1 ratios finite at every level"));
    if let Some(ok) = ratio.drift_within(audit.drift_tol) {
        assertions.push(Assertion::new(
            "ratio_drift",
            ok,
            format!("C2 drift {:?}, C1 drift {:?}, tolerance {}", ratio.c2_drift, ratio.c1_drift, audit.drift_tol),
        ));
    } else if !notes.iter().any(|n| n.contains("drift unavailable")) {
        notes.push("drift unavailable".into());
    }
    let table: Vec<Vec<String>> = rows
        .iter()
        .map(|r| {
            vec![
                r.scale.to_string(),
                format!("{:.17e}", r.h),
                opt(r.theta),
                opt(r.min_gap),
                opt(r.m_r_largest),
                opt(r.tangential_max),
                format!("{:.17e}", r.c2_ratio),
                format!("{:.17e}", r.c1_ratio),
            ]
        })
        .collect();
    Ok(Outcome {
        files: vec![(
            "sweep.csv".into(),
            table_csv(&["scale", "h", "theta", "min_gap", "m_R_largest", "tangential_max", "c2_ratio", "c1_ratio"], &table),
        )],
        payload: json!({ "norm": NORM_CONVENTION, "rows": rows, "ratio": ratio }),
        assertions,
        notes,
        ..Outcome::default()
    })
}
