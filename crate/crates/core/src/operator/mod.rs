//! Assembly of `U = ∇²u + A(x,t,∇u)`, evaluation of `F(U) = f(λ(U))`, its
//! linearization `𝓛`, and audits of the problem hypotheses.

pub mod afield;
pub mod problem;
pub mod psi;
pub mod verify;

use nalgebra::DMatrix;
use rayon::prelude::*;
use thiserror::Error;

use crate::geometry::{generalized_eigen, hessian_at, ChartGeometry, GeometryError, MetricField, ScalarField, TensorField2};
use crate::symfunc::{cone_margin, eval_f, grad_f, OperatorSpec, SymError};

pub use afield::AFieldSpec;
pub use problem::{GrowthParams, ProblemParts, ProblemSpec, SampleBox};
pub use psi::{PsiSpec, PsiTerm, SourceModel};
pub use verify::verify_problem;

/// Default slack for the admissibility mask.
pub const MASK_MARGIN: f64 = 1e-8;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum OperatorError {
    #[error("validation error: {0}")]
    Validation(String),
    #[error("inadmissible at node {node} (x = {x:?}): λ = {lambda:?}, cone margin {margin:e}")]
    Inadmissible {
        node: usize,
        x: Vec<f64>,
        lambda: Vec<f64>,
        margin: f64,
    },
    #[error(transparent)]
    Geometry(#[from] GeometryError),
    #[error(transparent)]
    Sym(#[from] SymError),
}

/// Pointwise evaluation context: a node of a chart at a time.
#[derive(Debug, Clone)]
pub struct NodeCtx<'a> {
    pub geo: &'a ChartGeometry,
    pub node: usize,
    pub x: Vec<f64>,
    pub t: f64,
}

impl<'a> NodeCtx<'a> {
    pub fn new(geo: &'a ChartGeometry, node: usize, t: f64) -> Self {
        Self {
            geo,
            node,
            x: geo.grid.coords(node),
            t,
        }
    }

    pub fn at_time(&self, t: f64) -> Self {
        Self {
            t,
            ..self.clone()
        }
    }

    pub fn at_node(&self, node: usize) -> Self {
        Self::new(self.geo, node, self.t)
    }

    pub fn g(&self) -> &DMatrix<f64> {
        &self.geo.metric.g[self.node]
    }

    pub fn g_inv(&self) -> &DMatrix<f64> {
        &self.geo.metric.g_inv[self.node]
    }

    pub fn gamma(&self) -> &[f64] {
        self.geo.connection.gamma_at(self.node)
    }

    pub fn raise(&self, p: &[f64]) -> Vec<f64> {
        self.geo.metric.raise(self.node, p)
    }

    pub fn covector_norm2(&self, p: &[f64]) -> f64 {
        self.geo.metric.covector_norm2(self.node, p)
    }

    pub fn vector_norm2(&self, v: &[f64]) -> f64 {
        self.geo.metric.inner(self.node, v, v)
    }
}

/// Output of [`eval_f_field`].
#[derive(Debug, Clone)]
pub struct FEval {
    /// `F` where `λ` lies in the cone, NaN elsewhere.
    pub values: ScalarField,
    /// Nodes whose cone margin exceeds the mask margin.
    pub mask: Vec<bool>,
    pub lambdas: Vec<Vec<f64>>,
    pub margins: Vec<f64>,
}

impl FEval {
    pub fn all_admissible(&self) -> bool {
        self.mask.iter().all(|&m| m)
    }

    pub fn min_margin(&self) -> f64 {
        self.margins.iter().copied().fold(f64::INFINITY, f64::min)
    }
}

/// `U_ij = ∇_ij u + A_ij(x, t, ∇u)` at one node, with the gradient used.
pub fn assemble_node(u: &[f64], t: f64, problem: &ProblemSpec, node: usize) -> (DMatrix<f64>, Vec<f64>) {
    let geo = &problem.geo;
    let p = geo.grid.gradient_at(u, node);
    let h = hessian_at(u, &geo.connection, &geo.grid, node);
    let ctx = NodeCtx::new(geo, node, t);
    (h + problem.a.value(&ctx, &p), p)
}

pub fn assemble_u(u: &[f64], t: f64, problem: &ProblemSpec) -> TensorField2 {
    let values = (0..problem.geo.len())
        .into_par_iter()
        .map(|node| assemble_node(u, t, problem, node).0)
        .collect();
    TensorField2 {
        n: problem.geo.dim(),
        values,
    }
}

/// `F = f(λ(U))` with eigenvalues relative to `g`, plus the admissibility mask.
pub fn eval_f_field(u: &TensorField2, metric: &MetricField, spec: &OperatorSpec) -> FEval {
    eval_f_field_with_margin(u, metric, spec, MASK_MARGIN)
}

pub fn eval_f_field_with_margin(u: &TensorField2, metric: &MetricField, spec: &OperatorSpec, margin: f64) -> FEval {
    let cone = spec.cone();
    let per: Vec<(f64, bool, Vec<f64>, f64)> = (0..u.len())
        .into_par_iter()
        .map(|node| match generalized_eigen(u.at(node), &metric.g[node]) {
            Ok(e) => {
                let m = cone_margin(&cone, &e.values);
                let f = eval_f(spec, &e.values).unwrap_or(f64::NAN);
                (f, m > margin, e.values, m)
            }
            Err(_) => (f64::NAN, false, vec![f64::NAN; u.n], f64::NEG_INFINITY),
        })
        .collect();
    let mut out = FEval {
        values: Vec::with_capacity(per.len()),
        mask: Vec::with_capacity(per.len()),
        lambdas: Vec::with_capacity(per.len()),
        margins: Vec::with_capacity(per.len()),
    };
    for (f, m, l, mg) in per {
        out.values.push(f);
        out.mask.push(m);
        out.lambdas.push(l);
        out.margins.push(mg);
    }
    out
}

/// Linearization data at one node.
#[derive(Debug, Clone)]
pub struct NodeLinearization {
    pub f: f64,
    /// `F^{ij} = Σ_a f_a w_a^i w_a^j` in chart components.
    pub f_upper: DMatrix<f64>,
    pub fi: Vec<f64>,
    pub lambda: Vec<f64>,
    /// `F^{ij} A^{ij}_{p_k} − ψ_{p_k}`.
    pub b: Vec<f64>,
    pub psi: f64,
    pub psi_z: f64,
    pub margin: f64,
}

#[derive(Debug, Clone)]
pub struct LinearizedState {
    pub t: f64,
    pub nodes: Vec<NodeLinearization>,
}

impl LinearizedState {
    /// `𝓛v = F^{ij}∇_ij v + b_k ∇_k v − v_t`.
    pub fn apply(&self, geo: &ChartGeometry, v: &[f64], v_t: &[f64]) -> ScalarField {
        (0..geo.len())
            .into_par_iter()
            .map(|node| self.apply_at(geo, v, v_t[node], node))
            .collect()
    }

    pub fn apply_at(&self, geo: &ChartGeometry, v: &[f64], v_t: f64, node: usize) -> f64 {
        let lin = &self.nodes[node];
        let h = hessian_at(v, &geo.connection, &geo.grid, node);
        let p = geo.grid.gradient_at(v, node);
        let n = geo.dim();
        let mut s = -v_t;
        for i in 0..n {
            s += lin.b[i] * p[i];
            for j in 0..n {
                s += lin.f_upper[(i, j)] * h[(i, j)];
            }
        }
        s
    }

    pub fn min_margin(&self) -> f64 {
        self.nodes.iter().map(|n| n.margin).fold(f64::INFINITY, f64::min)
    }

    /// Smallest eigenvalue of any `F^{ij}` relative to `g^{-1}`, i.e. `min f_i`.
    pub fn min_f_eigen(&self) -> f64 {
        self.nodes
            .iter()
            .flat_map(|n| n.fi.iter().copied())
            .fold(f64::INFINITY, f64::min)
    }
}

fn inadmissible(problem: &ProblemSpec, node: usize, lambda: Vec<f64>) -> OperatorError {
    let margin = cone_margin(&problem.op.cone(), &lambda);
    OperatorError::Inadmissible {
        node,
        x: problem.geo.grid.coords(node),
        lambda,
        margin,
    }
}

/// Linearization at one node, or the node's eigenvalues if it is outside the cone.
pub fn linearize_node(
    u: &[f64],
    t: f64,
    problem: &ProblemSpec,
    node: usize,
) -> Result<NodeLinearization, Vec<f64>> {
    let geo = &problem.geo;
    let (umat, p) = assemble_node(u, t, problem, node);
    let g = &geo.metric.g[node];
    let e = generalized_eigen(&umat, g).map_err(|_| vec![f64::NAN; geo.dim()])?;
    let f = eval_f(&problem.op, &e.values).map_err(|_| e.values.clone())?;
    let fi = grad_f(&problem.op, &e.values).map_err(|_| e.values.clone())?;
    let n = geo.dim();
    let mut f_upper = DMatrix::zeros(n, n);
    for (a, &fa) in fi.iter().enumerate() {
        let w = e.vectors.column(a);
        f_upper += w * w.transpose() * fa;
    }
    let ctx = NodeCtx::new(geo, node, t);
    let ap = problem.a.d_p(&ctx, &p);
    let psi_p = problem.psi.d_p(&ctx, u[node], &p);
    let b = (0..n)
        .map(|k| f_upper.component_mul(&ap[k]).sum() - psi_p[k])
        .collect();
    Ok(NodeLinearization {
        f,
        f_upper,
        margin: cone_margin(&problem.op.cone(), &e.values),
        lambda: e.values,
        fi,
        b,
        psi: problem.psi.value(&ctx, u[node], &p),
        psi_z: problem.psi.d_z(&ctx, u[node], &p),
    })
}

/// Linearization at every node; fails at the lowest-index inadmissible node.
pub fn linearize(u: &[f64], t: f64, problem: &ProblemSpec) -> Result<LinearizedState, OperatorError> {
    let per: Vec<Result<NodeLinearization, Vec<f64>>> = (0..problem.geo.len())
        .into_par_iter()
        .map(|node| linearize_node(u, t, problem, node))
        .collect();
    let mut nodes = Vec::with_capacity(per.len());
    let mut worst: Option<(usize, Vec<f64>, f64)> = None;
    for (node, r) in per.into_iter().enumerate() {
        match r {
            Ok(l) => nodes.push(l),
            Err(lambda) => {
                let m = cone_margin(&problem.op.cone(), &lambda);
                if worst.as_ref().is_none_or(|w| m < w.2) {
                    worst = Some((node, lambda, m));
                }
            }
        }
    }
    if let Some((node, lambda, _)) = worst {
        return Err(inadmissible(problem, node, lambda));
    }
    Ok(LinearizedState { t, nodes })
}

/// Time derivative used by [`residual`].
#[derive(Debug, Clone, Copy)]
pub enum TimeDerivative<'a> {
    Analytic(&'a [f64]),
    Backward { previous: &'a [f64], dt: f64 },
}

/// `F(U) − ∂_t u − ψ(x, t, u, ∇u)` at every node.
pub fn residual(u: &[f64], u_t: TimeDerivative, t: f64, problem: &ProblemSpec) -> Result<ScalarField, OperatorError> {
    let per: Vec<Result<f64, Vec<f64>>> = (0..problem.geo.len())
        .into_par_iter()
        .map(|node| {
            let (umat, p) = assemble_node(u, t, problem, node);
            let e = generalized_eigen(&umat, &problem.geo.metric.g[node])
                .map_err(|_| vec![f64::NAN; problem.geo.dim()])?;
            let f = eval_f(&problem.op, &e.values).map_err(|_| e.values)?;
            let ut = match u_t {
                TimeDerivative::Analytic(v) => v[node],
                TimeDerivative::Backward { previous, dt } => (u[node] - previous[node]) / dt,
            };
            let ctx = NodeCtx::new(&problem.geo, node, t);
            Ok(f - ut - problem.psi.value(&ctx, u[node], &p))
        })
        .collect();
    let mut out = Vec::with_capacity(per.len());
    for (node, r) in per.into_iter().enumerate() {
        match r {
            Ok(v) => out.push(v),
            Err(lambda) => return Err(inadmissible(problem, node, lambda)),
        }
    }
    Ok(out)
}

/// Row `node` of `∂(F(U) − ψ)/∂u_m` at the linearization point, as `(m, weight)`
/// pairs with repeated columns merged.
pub fn jacobian_row(lin: &LinearizedState, geo: &ChartGeometry, node: usize) -> Vec<(usize, f64)> {
    let l = &lin.nodes[node];
    let n = geo.dim();
    let mut row: Vec<(usize, f64)> = vec![(node, -l.psi_z)];
    for a in 0..n {
        for b in a..n {
            let c = if a == b { l.f_upper[(a, a)] } else { 2.0 * l.f_upper[(a, b)] };
            if c != 0.0 {
                row.extend(geo.grid.second_stencil(node, a, b).into_iter().map(|(m, w)| (m, c * w)));
            }
        }
    }
    for k in 0..n {
        let mut c = l.b[k];
        for a in 0..n {
            for b in 0..n {
                c -= l.f_upper[(a, b)] * geo.connection.gamma(node, k, a, b);
            }
        }
        if c != 0.0 {
            row.extend(geo.grid.first_stencil(node, k).into_iter().map(|(m, w)| (m, c * w)));
        }
    }
    row.sort_by_key(|e| e.0);
    let mut merged: Vec<(usize, f64)> = Vec::with_capacity(row.len());
    for (m, w) in row {
        match merged.last_mut() {
            Some(last) if last.0 == m => last.1 += w,
            _ => merged.push((m, w)),
        }
    }
    merged
}
