//! The barrier inequality `𝓛(u̲ − u) ≥ θ(1 + Σ F^{ii})`.

use rayon::prelude::*;
use serde::Serialize;

use super::{check_nonempty, sampled_sub, EstimateError};
use crate::operator::{linearize, ProblemSpec, MASK_MARGIN};
use crate::solver::Trajectory;
use crate::symfunc::{cone_margin, eval_f};

/// Bisection steps for `ε₀`.
pub const BISECTION_STEPS: usize = 60;

/// Tolerance of the `u ≥ u̲` precondition.
pub const ORDER_TOL: f64 = 1e-12;

#[derive(Debug, Clone, Serialize)]
pub struct StepGap {
    pub t: f64,
    pub min_gap: f64,
    pub argmin: usize,
}

#[derive(Debug, Clone, Serialize)]
pub struct BarrierAudit {
    /// Empirical `δ₀` over the grid at the stored times.
    pub delta0: f64,
    /// Largest `ε` keeping `λ(U̲) − ε` in the cone with the slack `δ₀/2`.
    pub eps0: f64,
    /// Largest `ε` keeping `λ(U̲) − ε` in the cone (margin only).
    pub eps_cone: f64,
    pub theta: f64,
    pub min_gap: f64,
    /// `(node, t)` of the smallest gap.
    pub argmin: (usize, f64),
    pub steps: Vec<StepGap>,
    /// Node limiting `ε₀` when it collapses to zero.
    pub failure: Option<String>,
    /// Interior nodes times steps examined.
    pub samples: usize,
}

impl BarrierAudit {
    pub fn passed(&self, tol: f64) -> bool {
        self.theta > 0.0 && self.min_gap >= -tol
    }
}

struct SubNode {
    lambda: Vec<f64>,
    /// `u̲_t + ψ[u̲] + δ₀/2`.
    rhs: f64,
}

fn shifted(lambda: &[f64], eps: f64) -> Vec<f64> {
    lambda.iter().map(|l| l - eps).collect()
}

/// Lowest-index sample violating the `ε`-shifted condition, if any.
fn first_violation(
    problem: &ProblemSpec,
    data: &[SubNode],
    eps: f64,
    with_slack: bool,
) -> Option<usize> {
    let cone = problem.op.cone();
    data.iter().position(|d| {
        let l = shifted(&d.lambda, eps);
        if !(cone_margin(&cone, &l) >= MASK_MARGIN) {
            return true;
        }
        with_slack && !eval_f(&problem.op, &l).is_ok_and(|f| f >= d.rhs)
    })
}

fn bisect(problem: &ProblemSpec, data: &[SubNode], eps_max: f64, with_slack: bool) -> f64 {
    if eps_max <= 0.0 || first_violation(problem, data, 0.0, with_slack).is_some() {
        return 0.0;
    }
    let (mut lo, mut hi) = (0.0, eps_max);
    if first_violation(problem, data, hi, with_slack).is_none() {
        return hi;
    }
    for _ in 0..BISECTION_STEPS {
        let mid = 0.5 * (lo + hi);
        if first_violation(problem, data, mid, with_slack).is_none() {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    lo
}

/// Gap field of the barrier inequality at interior nodes and every stored time
/// after the first, with `𝓛` linearized at `u` and `∂_t` the backward quotient.
pub fn barrier_gap(problem: &ProblemSpec, traj: &Trajectory) -> Result<BarrierAudit, EstimateError> {
    check_nonempty(traj)?;
    let subs = sampled_sub(problem, traj);
    for (m, (u, s)) in traj.states.iter().zip(&subs).enumerate() {
        if let Some(node) = (0..u.len()).find(|&i| u[i] < s[i] - ORDER_TOL) {
            return Err(EstimateError::Precondition(format!(
                "u < sub at node {node}, t = {}: {} < {}",
                traj.times[m], u[node], s[node]
            )));
        }
    }

    let (delta0, _, _) = problem.sub_slack(&traj.times);
    let data: Vec<SubNode> = traj
        .times
        .iter()
        .flat_map(|&t| {
            (0..problem.geo.len()).map(move |node| {
                let a = problem.analytic(&problem.sub, node, t);
                let ctx = problem.ctx(node, t);
                SubNode {
                    rhs: a.dt + problem.psi.value(&ctx, a.value, &a.grad) + 0.5 * delta0,
                    lambda: a.lambda,
                }
            })
        })
        .collect();
    let eps_max = data
        .iter()
        .flat_map(|d| d.lambda.iter().copied())
        .fold(f64::NEG_INFINITY, f64::max);
    let eps0 = if delta0 > 0.0 { bisect(problem, &data, eps_max, true) } else { 0.0 };
    let eps_cone = bisect(problem, &data, eps_max, false);
    let failure = (eps0 == 0.0).then(|| {
        let k = first_violation(problem, &data, 0.0, true).unwrap_or(0);
        let (m, node) = (k / problem.geo.len(), k % problem.geo.len());
        format!(
            "sub fails the shifted condition at eps = 0: node {node} (x = {:?}), t = {}, delta_0 = {delta0}",
            problem.geo.grid.coords(node),
            traj.times[m]
        )
    });
    let theta = (0.5 * delta0).min(eps0).max(0.0);

    let interior = problem.interior_nodes();
    let mut steps = Vec::new();
    for m in 1..traj.len() {
        let (t, u) = (traj.times[m], &traj.states[m]);
        let lin = linearize(u, t, problem)?;
        let w: Vec<f64> = subs[m].iter().zip(u).map(|(a, b)| a - b).collect();
        let w_prev: Vec<f64> = subs[m - 1].iter().zip(&traj.states[m - 1]).map(|(a, b)| a - b).collect();
        let dt = t - traj.times[m - 1];
        let gaps: Vec<f64> = interior
            .par_iter()
            .map(|&node| {
                let lw = lin.apply_at(&problem.geo, &w, (w[node] - w_prev[node]) / dt, node);
                let trace: f64 = lin.nodes[node].fi.iter().sum();
                lw - theta * (1.0 + trace)
            })
            .collect();
        let mut best = StepGap { t, min_gap: f64::INFINITY, argmin: 0 };
        for (&node, &g) in interior.iter().zip(&gaps) {
            if g < best.min_gap {
                best.min_gap = g;
                best.argmin = node;
            }
        }
        steps.push(best);
    }
    let worst = steps
        .iter()
        .fold(None::<&StepGap>, |w, s| match w {
            Some(w) if w.min_gap <= s.min_gap => Some(w),
            _ => Some(s),
        });
    Ok(BarrierAudit {
        delta0,
        eps0,
        eps_cone,
        theta,
        min_gap: worst.map_or(f64::INFINITY, |s| s.min_gap),
        argmin: worst.map_or((0, 0.0), |s| (s.argmin, s.t)),
        samples: interior.len() * steps.len(),
        steps,
        failure,
    })
}
