//! Boundary machinery: the reduced operator `G[r] = f(λ'(r), R)` on the
//! tangential block, the quantities `m_R`, `c_R`, `c′_R`, the comparison
//! function `Φ` and the tangential identity `∇_αβ(u − u̲) = −∇_n(u − u̲)Π_αβ`.

use nalgebra::DMatrix;
use serde::Serialize;

use super::psibarrier::PsiBarrierResult;
use super::{check_nonempty, max_spacing, EstimateError};
use crate::geometry::{boundary_frame, hessian_at, jacobi_symmetric, BoundaryNode};
use crate::operator::{assemble_node, ProblemSpec};
use crate::solver::Trajectory;
use crate::symfunc::{cone_margin, eval_f, grad_f};

/// Tolerance of the shared-boundary-data precondition.
pub const BOUNDARY_MATCH_TOL: f64 = 1e-12;

#[derive(Debug, Clone, Serialize)]
pub struct RungAudit {
    pub r: f64,
    /// `(λ', R)` lies in the open cone at every boundary sample.
    pub valid: bool,
    pub m_r: Option<f64>,
    pub c_r: Option<f64>,
    pub c_prime_r: Option<f64>,
    /// Smallest `G[U_αβ]` over the boundary samples.
    pub min_g: Option<f64>,
    /// `(node, t)` attaining `m_R`.
    pub argmin: Option<(usize, f64)>,
}

#[derive(Debug, Clone, Serialize)]
pub struct PhiAudit {
    pub r: f64,
    pub x0: usize,
    pub t0: f64,
    /// `∂G/∂r_αβ` at `(x₀, t₀)` in frame components.
    pub g0: Vec<Vec<f64>>,
    /// `Q − G₀^{αβ}∇_αβ u̲`, constant on the boundary.
    pub q_offset: f64,
    pub min_phi: f64,
    pub argmin_phi: (usize, f64),
    pub phi_at_x0: f64,
    pub min_h: f64,
    pub samples: usize,
}

#[derive(Debug, Clone, Serialize)]
pub struct TangentialResidual {
    /// `(node, normal axis, max over time and tangential pairs)`.
    pub per_node: Vec<(usize, usize, f64)>,
    pub max: f64,
    pub h: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct BoundaryAudit {
    /// Ascending, deduplicated.
    pub ladder: Vec<f64>,
    pub rungs: Vec<RungAudit>,
    /// `m_R` is non-decreasing over the valid rungs.
    pub monotone: bool,
    /// Smallest `R` with `m_R > 0`.
    pub first_positive: Option<f64>,
    pub phi: Option<PhiAudit>,
    pub tangential: Option<TangentialResidual>,
    pub psi_barrier: Option<PsiBarrierResult>,
    pub notes: Vec<String>,
}

impl BoundaryAudit {
    pub fn largest_valid(&self) -> Option<&RungAudit> {
        self.rungs.iter().rev().find(|r| r.valid)
    }
}

/// `Eᵀ S E` over the tangential columns of the frame.
pub(crate) fn tangential_block(entry: &BoundaryNode, s: &DMatrix<f64>) -> DMatrix<f64> {
    let n = entry.frame.nrows();
    let e = entry.frame.columns(0, n - 1);
    e.transpose() * s * e
}

/// Covariant derivative along the frame's inward normal.
pub(crate) fn normal_derivative(entry: &BoundaryNode, p: &[f64]) -> f64 {
    let n = entry.frame.nrows();
    (0..n).map(|i| entry.frame[(i, n - 1)] * p[i]).sum()
}

fn contract(a: &DMatrix<f64>, b: &DMatrix<f64>) -> f64 {
    a.component_mul(b).sum()
}

/// Eigenvalues and orthonormal eigenvectors of a symmetric block.
fn sym_eigen(block: &DMatrix<f64>) -> (Vec<f64>, DMatrix<f64>) {
    if block.nrows() == 0 {
        return (Vec::new(), block.clone());
    }
    jacobi_symmetric(block.clone())
}

/// `G` at a tangential block, or `None` outside the open cone.
fn reduced(problem: &ProblemSpec, block: &DMatrix<f64>, r: f64) -> Option<f64> {
    let (mut lambda, _) = sym_eigen(block);
    lambda.push(r);
    (cone_margin(&problem.op.cone(), &lambda) > 0.0)
        .then(|| eval_f(&problem.op, &lambda).ok())
        .flatten()
}

/// `∂G/∂r_αβ = Σ_a f_a w_a w_aᵀ` over the tangential eigenpairs.
fn reduced_gradient(problem: &ProblemSpec, block: &DMatrix<f64>, r: f64) -> Option<DMatrix<f64>> {
    let (mut lambda, w) = sym_eigen(block);
    lambda.push(r);
    let fi = grad_f(&problem.op, &lambda).ok()?;
    let k = block.nrows();
    let mut out = DMatrix::zeros(k, k);
    for a in 0..k {
        let col = w.column(a);
        out += col * col.transpose() * fi[a];
    }
    Some(out)
}

struct Sample {
    entry: usize,
    m: usize,
    /// Tangential block of `U` from the discrete solution.
    block: DMatrix<f64>,
    /// `u_t + ψ[u]` with `u_t = φ_t`.
    shift: f64,
}

fn discrete_samples(problem: &ProblemSpec, traj: &Trajectory, entries: &[BoundaryNode]) -> Vec<Sample> {
    let mut out = Vec::with_capacity(entries.len() * traj.len());
    for (m, u) in traj.states.iter().enumerate() {
        let t = traj.times[m];
        for (k, e) in entries.iter().enumerate() {
            let (umat, p) = assemble_node(u, t, problem, e.node);
            let ctx = problem.ctx(e.node, t);
            let phi_t = problem.phi.jet(&ctx.x, t).dt;
            out.push(Sample {
                entry: k,
                m,
                block: tangential_block(e, &umat),
                shift: phi_t + problem.psi.value(&ctx, u[e.node], &p),
            });
        }
    }
    out
}

/// Tangential block of `∇²w + A[w]` and `w_t + ψ[w]` for an analytic field.
fn analytic_sample(problem: &ProblemSpec, w: &crate::expr::Expr, e: &BoundaryNode, t: f64) -> (DMatrix<f64>, f64) {
    let a = problem.analytic(w, e.node, t);
    let ctx = problem.ctx(e.node, t);
    (tangential_block(e, &a.u), a.dt + problem.psi.value(&ctx, a.value, &a.grad))
}

fn min_over(values: impl Iterator<Item = Option<f64>>) -> Option<f64> {
    let mut best: Option<f64> = Some(f64::INFINITY);
    for v in values {
        best = match (best, v) {
            (Some(b), Some(v)) => Some(b.min(v)),
            _ => None,
        };
    }
    best.filter(|b| b.is_finite())
}

/// `m_R`, `c_R` and `c′_R` along the ladder, with `Φ` built at the minimizer
/// of the largest valid rung.
pub fn boundary_mr(problem: &ProblemSpec, traj: &Trajectory, ladder: &[f64]) -> Result<BoundaryAudit, EstimateError> {
    check_nonempty(traj)?;
    let geo = &problem.geo;
    if !geo.grid.has_boundary() {
        return Err(EstimateError::NoBoundary);
    }
    let frame = boundary_frame(&geo.metric, &geo.connection, &geo.grid)?;
    let entries = frame.entries;
    let mut ladder: Vec<f64> = ladder.iter().copied().filter(|r| r.is_finite()).collect();
    ladder.sort_by(f64::total_cmp);
    ladder.dedup();

    let samples = discrete_samples(problem, traj, &entries);
    let sub_samples: Vec<(DMatrix<f64>, f64)> = traj
        .times
        .iter()
        .flat_map(|&t| entries.iter().map(move |e| (e, t)))
        .map(|(e, t)| analytic_sample(problem, &problem.sub, e, t))
        .collect();
    let phi_samples: Vec<(DMatrix<f64>, f64)> =
        entries.iter().map(|e| analytic_sample(problem, &problem.phi, e, 0.0)).collect();

    let mut rungs = Vec::with_capacity(ladder.len());
    for &r in &ladder {
        let g: Vec<Option<f64>> = samples.iter().map(|s| reduced(problem, &s.block, r)).collect();
        let valid = g.iter().all(Option::is_some);
        if !valid {
            rungs.push(RungAudit { r, valid, m_r: None, c_r: None, c_prime_r: None, min_g: None, argmin: None });
            continue;
        }
        let mut m_r = f64::INFINITY;
        let mut arg = 0;
        for (k, (s, gv)) in samples.iter().zip(&g).enumerate() {
            let v = gv.unwrap() - s.shift;
            if v < m_r {
                m_r = v;
                arg = k;
            }
        }
        let c_r = min_over(sub_samples.iter().map(|(b, sh)| reduced(problem, b, r).map(|g| g - sh)));
        let c_prime_r = min_over(phi_samples.iter().map(|(b, sh)| reduced(problem, b, r).map(|g| g - sh)));
        let s = &samples[arg];
        rungs.push(RungAudit {
            r,
            valid,
            m_r: Some(m_r),
            c_r,
            c_prime_r,
            min_g: g.iter().flatten().copied().reduce(f64::min),
            argmin: Some((entries[s.entry].node, traj.times[s.m])),
        });
    }

    let valid_m: Vec<f64> = rungs.iter().filter_map(|r| r.m_r).collect();
    let monotone = valid_m.windows(2).all(|w| w[1] >= w[0]);
    let first_positive = rungs.iter().find(|r| r.m_r.is_some_and(|m| m > 0.0)).map(|r| r.r);
    let mut notes = Vec::new();
    let invalid: Vec<String> = rungs.iter().filter(|r| !r.valid).map(|r| r.r.to_string()).collect();
    if !invalid.is_empty() {
        notes.push(format!("R outside the cone domain: {}", invalid.join(", ")));
    }
    if first_positive.is_none() {
        notes.push("no R in the ladder gives m_R > 0".into());
    }
    if !problem.sub_matches_boundary {
        notes.push("sub differs from phi on the boundary; Phi(x0, t0) = 0 is not expected".into());
    }

    let phi = rungs.iter().rev().find(|r| r.valid).and_then(|rung| {
        let k = samples
            .iter()
            .enumerate()
            .map(|(k, s)| (k, reduced(problem, &s.block, rung.r).unwrap() - s.shift))
            .fold((0, f64::INFINITY), |b, (k, v)| if v < b.1 { (k, v) } else { b })
            .0;
        phi_audit(problem, traj, &entries, &samples[k], rung.r)
    });
    if phi.is_none() && !rungs.iter().any(|r| r.valid) {
        notes.push("no valid R; Phi not evaluated".into());
    }

    Ok(BoundaryAudit {
        ladder,
        rungs,
        monotone,
        first_positive,
        phi,
        tangential: None,
        psi_barrier: None,
        notes,
    })
}

fn phi_audit(
    problem: &ProblemSpec,
    traj: &Trajectory,
    entries: &[BoundaryNode],
    at: &Sample,
    r: f64,
) -> Option<PhiAudit> {
    let g0 = reduced_gradient(problem, &at.block, r)?;
    let e0 = &entries[at.entry];
    let t0 = traj.times[at.m];
    let u0 = &traj.states[at.m];
    let ctx0 = problem.ctx(e0.node, t0);
    let p0 = problem.geo.grid.gradient_at(u0, e0.node);
    let phi_t0 = problem.phi.jet(&ctx0.x, t0).dt;
    // Q = G₀^{αβ}∇_αβ u̲ + q_offset, the offset frozen at (x₀, t₀).
    let q_offset = -contract(&g0, &at.block) + problem.psi.value(&ctx0, u0[e0.node], &p0) + phi_t0;

    let mut min_phi = (f64::INFINITY, (0, 0.0));
    let mut min_h = f64::INFINITY;
    let mut phi_at_x0 = f64::NAN;
    let mut count = 0;
    for (m, u) in traj.states.iter().enumerate() {
        let t = traj.times[m];
        for (k, e) in entries.iter().enumerate() {
            let ctx = problem.ctx(e.node, t);
            let p = problem.geo.grid.gradient_at(u, e.node);
            let h = contract(&g0, &tangential_block(e, &problem.a.value(&ctx, &p))) - problem.psi.value(&ctx, u[e.node], &p);
            let eta = contract(&g0, &e.pi);
            let sub = problem.analytic(&problem.sub, e.node, t);
            let hess_sub = &sub.u - problem.a.value(&ctx, &sub.grad);
            let q = contract(&g0, &tangential_block(e, &hess_sub)) + q_offset;
            let dn: Vec<f64> = p.iter().zip(&sub.grad).map(|(a, b)| a - b).collect();
            let phi_t = problem.phi.jet(&ctx.x, t).dt;
            let value = -eta * normal_derivative(e, &dn) + h - phi_t + q;
            if value < min_phi.0 {
                min_phi = (value, (e.node, t));
            }
            min_h = min_h.min(h);
            if k == at.entry && m == at.m {
                phi_at_x0 = value;
            }
            count += 1;
        }
    }
    Some(PhiAudit {
        r,
        x0: e0.node,
        t0,
        g0: g0.row_iter().map(|row| row.iter().copied().collect()).collect(),
        q_offset,
        min_phi: min_phi.0,
        argmin_phi: min_phi.1,
        phi_at_x0,
        min_h,
        samples: count,
    })
}

/// `max_αβ |∇_αβ(u − u̲) + ∇_n(u − u̲)Π_αβ|` per boundary node, with `u` from
/// discrete stencils and `u̲` from its analytic jet.
pub fn tangential_identity_residual(problem: &ProblemSpec, traj: &Trajectory) -> Result<TangentialResidual, EstimateError> {
    check_nonempty(traj)?;
    let geo = &problem.geo;
    if !geo.grid.has_boundary() {
        return Err(EstimateError::NoBoundary);
    }
    let entries = boundary_frame(&geo.metric, &geo.connection, &geo.grid)?.entries;
    for (m, u) in traj.states.iter().enumerate() {
        let t = traj.times[m];
        for e in &entries {
            let s = problem.sub.value(&geo.grid.coords(e.node), t);
            if (u[e.node] - s).abs() > BOUNDARY_MATCH_TOL {
                return Err(EstimateError::Precondition(format!(
                    "u and sub differ on the boundary at node {}, t = {t}: |u - sub| = {:e}",
                    e.node,
                    (u[e.node] - s).abs()
                )));
            }
        }
    }
    let mut per_node: Vec<(usize, usize, f64)> = entries.iter().map(|e| (e.node, e.axis, 0.0)).collect();
    for (m, u) in traj.states.iter().enumerate() {
        let t = traj.times[m];
        for (k, e) in entries.iter().enumerate() {
            let ctx = problem.ctx(e.node, t);
            let sub = problem.analytic(&problem.sub, e.node, t);
            let hess_sub = &sub.u - problem.a.value(&ctx, &sub.grad);
            let hess_u = hessian_at(u, &geo.connection, &geo.grid, e.node);
            let p = geo.grid.gradient_at(u, e.node);
            let dp: Vec<f64> = p.iter().zip(&sub.grad).map(|(a, b)| a - b).collect();
            let res = tangential_block(e, &(hess_u - hess_sub)) + &e.pi * normal_derivative(e, &dp);
            let v = res.abs().max();
            per_node[k].2 = per_node[k].2.max(v);
        }
    }
    let max = per_node.iter().map(|p| p.2).fold(0.0, f64::max);
    Ok(TangentialResidual { per_node, max, h: max_spacing(problem) })
}
