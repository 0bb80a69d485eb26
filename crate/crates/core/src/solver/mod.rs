//! Implicit Euler time stepping with a damped, admissibility-preserving Newton method.

pub mod linear;
pub mod mms;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use sprs::CsMat;
use thiserror::Error;

use crate::geometry::ScalarField;
use crate::operator::{jacobian_row, linearize, LinearizedState, OperatorError, ProblemSpec};

pub use linear::{KrylovMethod, LinearStats};
pub use mms::{mms_convergence, ErrorSample, MmsPlan, RateReport};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SolverConfig {
    pub dt: f64,
    /// Sup-norm of the step residual at which Newton stops.
    pub newton_tol: f64,
    pub max_newton: usize,
    /// Backtracking factor in `(0, 1)`.
    pub shrink: f64,
    /// Smallest damping factor tried before the line search gives up.
    pub min_step: f64,
    /// Cone margin every accepted iterate must keep.
    pub margin: f64,
    pub linear_tol: f64,
    pub linear_max_iter: usize,
    /// Retries of a failed step with halved `Δt`.
    pub max_halvings: usize,
    /// Try the subsolution (with boundary values replaced) as an initial guess.
    pub sub_guess: bool,
}

impl Default for SolverConfig {
    fn default() -> Self {
        Self {
            dt: 1e-2,
            newton_tol: 1e-10,
            max_newton: 30,
            shrink: 0.5,
            min_step: 1e-6,
            margin: 1e-8,
            linear_tol: 1e-10,
            linear_max_iter: 2000,
            max_halvings: 4,
            sub_guess: true,
        }
    }
}

impl SolverConfig {
    pub fn validate(&self) -> Result<(), SolverError> {
        let bad = |m: &str| Err(SolverError::Config(m.into()));
        if !(self.dt > 0.0 && self.dt.is_finite()) {
            return bad("solver.dt must be positive");
        }
        if !(self.newton_tol > 0.0) || !(self.linear_tol > 0.0) {
            return bad("solver tolerances must be positive");
        }
        if !(self.shrink > 0.0 && self.shrink < 1.0) {
            return bad("solver.shrink must lie in (0, 1)");
        }
        if !(self.min_step > 0.0 && self.min_step <= 1.0) {
            return bad("solver.min_step must lie in (0, 1]");
        }
        if !(self.margin >= 0.0) {
            return bad("solver.margin must be >= 0");
        }
        if self.max_newton == 0 || self.linear_max_iter == 0 {
            return bad("solver iteration caps must be >= 1");
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum SolverError {
    #[error("invalid solver config: {0}")]
    Config(String),
    #[error(transparent)]
    Operator(#[from] OperatorError),
    #[error("no admissible iterate at t = {t}: worst node {node} (x = {x:?}), λ = {lambda:?}, margin {margin:e}")]
    Inadmissible {
        t: f64,
        node: usize,
        x: Vec<f64>,
        lambda: Vec<f64>,
        margin: f64,
    },
    #[error("Newton did not converge at t = {t} after {iterations} iterations (residual {residual:e})")]
    NewtonDiverged { t: f64, iterations: usize, residual: f64 },
    #[error("line search stalled at t = {t} (residual {residual:e})")]
    LineSearch { t: f64, residual: f64 },
    #[error("solver invariant violated: {0}")]
    Invariant(String),
}

impl SolverError {
    fn retryable(&self) -> bool {
        matches!(
            self,
            SolverError::Inadmissible { .. } | SolverError::NewtonDiverged { .. } | SolverError::LineSearch { .. }
        )
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct StepDiagnostics {
    pub t: f64,
    pub dt: f64,
    pub halvings: usize,
    pub newton_iterations: usize,
    pub linear_iterations: usize,
    /// Sup-norm step residual after each accepted iterate, starting from the guess.
    pub residual_history: Vec<f64>,
    pub residual: f64,
    /// Smallest cone margin over the accepted iterates of this step.
    pub iterate_min_margin: f64,
    /// Cone margin of the stored state.
    pub min_margin: f64,
    /// Smallest `f_i` over the accepted iterates.
    pub min_f_eigen: f64,
}

/// Time levels of a solve; `states[0] = φ(·, 0)` and `diagnostics[m]` describes the step
/// to `times[m + 1]`.
#[derive(Debug, Clone, Serialize)]
pub struct Trajectory {
    pub times: Vec<f64>,
    #[serde(skip)]
    pub states: Vec<ScalarField>,
    pub initial_margin: f64,
    pub diagnostics: Vec<StepDiagnostics>,
}

impl Trajectory {
    pub fn len(&self) -> usize {
        self.states.len()
    }

    pub fn is_empty(&self) -> bool {
        self.states.is_empty()
    }

    pub fn last(&self) -> (f64, &ScalarField) {
        (*self.times.last().unwrap(), self.states.last().unwrap())
    }

    /// Smallest cone margin over stored states and accepted Newton iterates.
    pub fn min_margin(&self) -> f64 {
        self.diagnostics
            .iter()
            .map(|d| d.iterate_min_margin.min(d.min_margin))
            .fold(self.initial_margin, f64::min)
    }

    pub fn max_newton_iterations(&self) -> usize {
        self.diagnostics.iter().map(|d| d.newton_iterations).max().unwrap_or(0)
    }

    pub fn max_residual(&self) -> f64 {
        self.diagnostics.iter().map(|d| d.residual).fold(0.0, f64::max)
    }

    /// `(u_m − u_{m−1}) / (t_m − t_{m−1})`, with the first step's quotient at `m = 0`.
    pub fn time_derivative(&self, m: usize) -> ScalarField {
        let (a, b) = if m == 0 { (0, 1.min(self.len() - 1)) } else { (m - 1, m) };
        if a == b {
            return vec![0.0; self.states[0].len()];
        }
        let dt = self.times[b] - self.times[a];
        self.states[b].iter().zip(&self.states[a]).map(|(x, y)| (x - y) / dt).collect()
    }
}

/// A failed solve with everything computed before the failure.
#[derive(Debug, Clone, Error)]
#[error("{error} (after {} stored states)", partial.len())]
pub struct SolveFailure {
    pub partial: Trajectory,
    pub error: SolverError,
}

fn sup(v: &[f64]) -> f64 {
    v.iter().fold(0.0, |m, x| m.max(x.abs()))
}

/// Implicit Euler residual `F(U) − (u − u_m)/Δt − ψ` on interior nodes, zero on the boundary.
fn step_residual(lin: &LinearizedState, u: &[f64], u_prev: &[f64], dt: f64, boundary: &[bool]) -> Vec<f64> {
    lin.nodes
        .iter()
        .enumerate()
        .map(|(i, l)| if boundary[i] { 0.0 } else { l.f - (u[i] - u_prev[i]) / dt - l.psi })
        .collect()
}

fn step_matrix(lin: &LinearizedState, problem: &ProblemSpec, dt: f64, boundary: &[bool]) -> CsMat<f64> {
    let n = problem.geo.len();
    let rows: Vec<Vec<(usize, f64)>> = (0..n)
        .into_par_iter()
        .map(|i| {
            if boundary[i] {
                return vec![(i, 1.0)];
            }
            let mut row = jacobian_row(lin, &problem.geo, i);
            match row.iter_mut().find(|e| e.0 == i) {
                Some(e) => e.1 -= 1.0 / dt,
                None => {
                    row.push((i, -1.0 / dt));
                    row.sort_by_key(|e| e.0);
                }
            }
            row
        })
        .collect();
    let mut indptr = Vec::with_capacity(n + 1);
    let mut indices = Vec::new();
    let mut data = Vec::new();
    indptr.push(0);
    for row in rows {
        for (j, w) in row {
            indices.push(j);
            data.push(w);
        }
        indptr.push(indices.len());
    }
    CsMat::new((n, n), indptr, indices, data)
}

fn admissible(u: &[f64], t: f64, problem: &ProblemSpec, margin: f64) -> Result<LinearizedState, SolverError> {
    let lin = linearize(u, t, problem).map_err(|e| match e {
        OperatorError::Inadmissible { node, x, lambda, margin } => SolverError::Inadmissible { t, node, x, lambda, margin },
        other => other.into(),
    })?;
    let (node, m) = lin
        .nodes
        .iter()
        .enumerate()
        .map(|(i, l)| (i, l.margin))
        .fold((0, f64::INFINITY), |a, b| if b.1 < a.1 { b } else { a });
    if m < margin {
        return Err(SolverError::Inadmissible {
            t,
            node,
            x: problem.geo.grid.coords(node),
            lambda: lin.nodes[node].lambda.clone(),
            margin: m,
        });
    }
    Ok(lin)
}

fn initial_guesses(u_prev: &[f64], t_prev: f64, t: f64, problem: &ProblemSpec, config: &SolverConfig) -> Vec<ScalarField> {
    let boundary: Vec<usize> = problem.boundary_nodes();
    let phi_next = problem.sample(&problem.phi, t);
    let with_boundary = |mut u: ScalarField| {
        for &b in &boundary {
            u[b] = phi_next[b];
        }
        u
    };
    let mut out = Vec::new();
    if !boundary.is_empty() {
        let phi_prev = problem.sample(&problem.phi, t_prev);
        let shifted: ScalarField = u_prev
            .iter()
            .zip(phi_next.iter().zip(&phi_prev))
            .map(|(u, (a, b))| u + a - b)
            .collect();
        out.push(with_boundary(shifted));
    }
    out.push(with_boundary(u_prev.to_vec()));
    if config.sub_guess {
        out.push(with_boundary(problem.sample(&problem.sub, t)));
    }
    out
}

/// One implicit Euler step from `(t_prev, u_prev)` to `t` with boundary values `φ(·, t)`.
pub fn implicit_step(
    u_prev: &[f64],
    t_prev: f64,
    t: f64,
    problem: &ProblemSpec,
    config: &SolverConfig,
) -> Result<(ScalarField, StepDiagnostics), SolverError> {
    let dt = t - t_prev;
    if !(dt > 0.0) {
        return Err(SolverError::Config(format!("step must advance time, got {t_prev} -> {t}")));
    }
    let boundary: Vec<bool> = (0..problem.geo.len()).map(|n| problem.geo.grid.is_boundary(n)).collect();
    let mut start = None;
    let mut first_err = None;
    for guess in initial_guesses(u_prev, t_prev, t, problem, config) {
        match admissible(&guess, t, problem, config.margin) {
            Ok(lin) => {
                start = Some((guess, lin));
                break;
            }
            Err(e) => {
                first_err.get_or_insert(e);
            }
        }
    }
    let Some((mut u, mut lin)) = start else {
        return Err(first_err.unwrap());
    };
    let mut res = step_residual(&lin, &u, u_prev, dt, &boundary);
    let mut r = sup(&res);
    let mut diag = StepDiagnostics {
        t,
        dt,
        halvings: 0,
        newton_iterations: 0,
        linear_iterations: 0,
        residual_history: vec![r],
        residual: r,
        iterate_min_margin: lin.min_margin(),
        min_margin: lin.min_margin(),
        min_f_eigen: lin.min_f_eigen(),
    };
    while r > config.newton_tol {
        if diag.newton_iterations >= config.max_newton {
            return Err(SolverError::NewtonDiverged { t, iterations: diag.newton_iterations, residual: r });
        }
        let j = step_matrix(&lin, problem, dt, &boundary);
        let rhs: Vec<f64> = res.iter().map(|v| -v).collect();
        let (mut delta, stats) = linear::solve(&j, &rhs, config.linear_tol, config.linear_max_iter);
        for (d, &b) in delta.iter_mut().zip(&boundary) {
            if b {
                *d = 0.0;
            }
        }
        diag.linear_iterations += stats.iterations;
        let mut alpha = 1.0;
        let mut cone_failure = None;
        let accepted = loop {
            let cand: ScalarField = u.iter().zip(&delta).map(|(a, d)| a + alpha * d).collect();
            match admissible(&cand, t, problem, config.margin) {
                Ok(l) => {
                    let rc = step_residual(&l, &cand, u_prev, dt, &boundary);
                    let rn = sup(&rc);
                    if rn <= r {
                        break Some((cand, l, rc, rn));
                    }
                }
                Err(e @ SolverError::Inadmissible { .. }) => {
                    cone_failure.get_or_insert(e);
                }
                Err(e) => return Err(e),
            }
            alpha *= config.shrink;
            if alpha < config.min_step {
                break None;
            }
        };
        let Some((cand, l, rc, rn)) = accepted else {
            return Err(cone_failure.unwrap_or(SolverError::LineSearch { t, residual: r }));
        };
        if rn > r {
            return Err(SolverError::Invariant(format!("residual increased at t = {t}")));
        }
        let fmin = l.min_f_eigen();
        if !(fmin > 0.0) {
            return Err(SolverError::Invariant(format!("F^ij not positive definite at t = {t} (min f_i = {fmin:e})")));
        }
        (u, lin, res, r) = (cand, l, rc, rn);
        diag.newton_iterations += 1;
        diag.residual_history.push(r);
        diag.iterate_min_margin = diag.iterate_min_margin.min(lin.min_margin());
        diag.min_f_eigen = diag.min_f_eigen.min(fmin);
    }
    diag.residual = r;
    diag.min_margin = lin.min_margin();
    Ok((u, diag))
}

/// Solves to the horizon, halving `Δt` on failed steps.
pub fn solve_ibvp(problem: &ProblemSpec, config: &SolverConfig) -> Result<Trajectory, SolveFailure> {
    let u0 = problem.sample(&problem.phi, 0.0);
    let mut traj = Trajectory {
        times: vec![0.0],
        states: vec![],
        initial_margin: f64::NAN,
        diagnostics: vec![],
    };
    if let Err(error) = config.validate() {
        return Err(SolveFailure { partial: traj, error });
    }
    match admissible(&u0, 0.0, problem, config.margin) {
        Ok(lin) => traj.initial_margin = lin.min_margin(),
        Err(error) => return Err(SolveFailure { partial: traj, error }),
    }
    traj.states.push(u0);
    let horizon = problem.horizon;
    let mut t = 0.0;
    while t < horizon * (1.0 - 1e-12) {
        let full = if horizon - t <= config.dt * (1.0 + 1e-9) { horizon - t } else { config.dt };
        let mut dt = full;
        let mut halvings = 0;
        let u_prev = traj.states.last().unwrap().clone();
        loop {
            let t_next = if halvings == 0 && full == horizon - t { horizon } else { t + dt };
            match implicit_step(&u_prev, t, t_next, problem, config) {
                Ok((u, mut diag)) => {
                    diag.halvings = halvings;
                    t = t_next;
                    traj.times.push(t);
                    traj.states.push(u);
                    traj.diagnostics.push(diag);
                    break;
                }
                Err(e) if e.retryable() && halvings < config.max_halvings => {
                    halvings += 1;
                    dt *= 0.5;
                }
                Err(error) => return Err(SolveFailure { partial: traj, error }),
            }
        }
    }
    Ok(traj)
}
