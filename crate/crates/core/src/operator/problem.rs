//! The initial-boundary value problem and analytic evaluation of its data.

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use super::{AFieldSpec, NodeCtx, OperatorError, PsiSpec, SourceModel, MASK_MARGIN};
use crate::expr::Expr;
use crate::geometry::{analytic_hessian, generalized_eigen, ChartGeometry, ScalarField};
use crate::symfunc::{cone_margin, eval_f, OperatorSpec};

/// Declared growth exponents and the A3 constant; `None` means "report only".
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GrowthParams {
    pub gamma1: Option<f64>,
    pub gamma2: Option<f64>,
    pub gamma: Option<f64>,
    pub c0: Option<f64>,
}

/// The `(z, p)` box over which unbounded quantifiers are sampled.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SampleBox {
    pub z_min: f64,
    pub z_max: f64,
    /// Largest sampled `|p|_g`.
    pub p_max: f64,
}

impl Default for SampleBox {
    fn default() -> Self {
        Self {
            z_min: -10.0,
            z_max: 10.0,
            p_max: 10.0,
        }
    }
}

/// Unvalidated problem data.
#[derive(Debug, Clone)]
pub struct ProblemParts {
    pub name: String,
    pub geo: ChartGeometry,
    pub op: OperatorSpec,
    pub a: AFieldSpec,
    pub psi: PsiSpec,
    /// Initial and lateral boundary data.
    pub phi: Expr,
    pub sub: Expr,
    pub horizon: f64,
    /// Known exact solution, if any.
    pub exact: Option<Expr>,
    pub growth: GrowthParams,
    pub sample_box: SampleBox,
    /// Whether `u̲ = φ` on the lateral boundary is asserted.
    pub sub_matches_boundary: bool,
}

/// A validated problem: dimensions agree and `φ(·, 0)` is admissible.
#[derive(Debug, Clone)]
pub struct ProblemSpec {
    pub name: String,
    pub geo: ChartGeometry,
    pub op: OperatorSpec,
    pub a: AFieldSpec,
    pub psi: PsiSpec,
    pub phi: Expr,
    pub sub: Expr,
    pub horizon: f64,
    pub exact: Option<Expr>,
    pub growth: GrowthParams,
    pub sample_box: SampleBox,
    pub sub_matches_boundary: bool,
}

/// An analytic field evaluated at a node.
#[derive(Debug, Clone)]
pub struct AnalyticState {
    pub value: f64,
    pub dt: f64,
    pub grad: Vec<f64>,
    /// `∇²w + A(x, t, ∇w)`.
    pub u: DMatrix<f64>,
    pub lambda: Vec<f64>,
}

impl ProblemSpec {
    pub fn new(parts: ProblemParts) -> Result<Self, OperatorError> {
        let n = parts.geo.dim();
        if parts.op.n != n {
            return Err(OperatorError::Validation(format!(
                "operator.n = {} but the chart has dimension {n}",
                parts.op.n
            )));
        }
        if !(parts.horizon > 0.0 && parts.horizon.is_finite()) {
            return Err(OperatorError::Validation(format!(
                "horizon must be positive, got {}",
                parts.horizon
            )));
        }
        if parts.sample_box.z_min > parts.sample_box.z_max || !(parts.sample_box.p_max > 0.0) {
            return Err(OperatorError::Validation("sample box must have z_min <= z_max and p_max > 0".into()));
        }
        parts
            .a
            .validate(parts.geo.len(), n)
            .map_err(OperatorError::Validation)?;
        for (label, e) in [("phi", &parts.phi), ("subsolution", &parts.sub)]
            .into_iter()
            .chain(parts.exact.iter().map(|e| ("exact", e)))
        {
            if e.arity() > n {
                return Err(OperatorError::Validation(format!(
                    "{label} uses {} coordinates, chart has {n}",
                    e.arity()
                )));
            }
        }
        let mut psi = parts.psi;
        psi.bind(SourceModel {
            op: parts.op,
            a: parts.a.clone(),
        });
        let problem = Self {
            name: parts.name,
            geo: parts.geo,
            op: parts.op,
            a: parts.a,
            psi,
            phi: parts.phi,
            sub: parts.sub,
            horizon: parts.horizon,
            exact: parts.exact,
            growth: parts.growth,
            sample_box: parts.sample_box,
            sub_matches_boundary: parts.sub_matches_boundary,
        };
        problem.check_initial_admissible()?;
        Ok(problem)
    }

    /// Rejects `φ(·, 0)` outside the cone, naming the worst node.
    pub fn check_initial_admissible(&self) -> Result<(), OperatorError> {
        let (node, margin) = self.min_analytic_margin(&self.phi, 0.0);
        if margin > MASK_MARGIN {
            return Ok(());
        }
        let s = self.analytic(&self.phi, node, 0.0);
        Err(OperatorError::Inadmissible {
            node,
            x: self.geo.grid.coords(node),
            lambda: s.lambda,
            margin,
        })
    }

    pub fn ctx(&self, node: usize, t: f64) -> NodeCtx<'_> {
        NodeCtx::new(&self.geo, node, t)
    }

    pub fn dim(&self) -> usize {
        self.geo.dim()
    }

    /// `w`, `∂_t w`, `∇w` and `∇²w + A[w]` of an analytic field at a node.
    pub fn analytic(&self, w: &Expr, node: usize, t: f64) -> AnalyticState {
        let ctx = self.ctx(node, t);
        let jet = w.jet(&ctx.x, t);
        let u = analytic_hessian(&jet.grad, &jet.hess, ctx.gamma()) + self.a.value(&ctx, &jet.grad);
        let lambda = generalized_eigen(&u, ctx.g())
            .map(|e| e.values)
            .unwrap_or_else(|_| vec![f64::NAN; self.dim()]);
        AnalyticState {
            value: jet.value,
            dt: jet.dt,
            grad: jet.grad,
            u,
            lambda,
        }
    }

    /// `f(λ(∇²w + A[w])) − w_t − ψ[w]` at a node; NaN outside the cone.
    pub fn analytic_residual(&self, w: &Expr, node: usize, t: f64) -> f64 {
        let s = self.analytic(w, node, t);
        let ctx = self.ctx(node, t);
        match eval_f(&self.op, &s.lambda) {
            Ok(f) => f - s.dt - self.psi.value(&ctx, s.value, &s.grad),
            Err(_) => f64::NAN,
        }
    }

    /// Empirical subsolution slack `δ₀ = min F[u̲] − u̲_t − ψ[u̲]` over the grid at
    /// the given times, with its lowest-index argmin `(node, t)`.
    pub fn sub_slack(&self, times: &[f64]) -> (f64, usize, f64) {
        let mut best = (f64::INFINITY, 0, 0.0);
        for &t in times {
            for node in 0..self.geo.len() {
                let r = self.analytic_residual(&self.sub, node, t);
                let r = if r.is_nan() { f64::NEG_INFINITY } else { r };
                if r < best.0 {
                    best = (r, node, t);
                }
            }
        }
        best
    }

    /// Lowest-index node of minimal cone margin for an analytic field at time `t`.
    pub fn min_analytic_margin(&self, w: &Expr, t: f64) -> (usize, f64) {
        let cone = self.op.cone();
        let mut best = (0, f64::INFINITY);
        for node in 0..self.geo.len() {
            let m = cone_margin(&cone, &self.analytic(w, node, t).lambda);
            let m = if m.is_nan() { f64::NEG_INFINITY } else { m };
            if m < best.1 {
                best = (node, m);
            }
        }
        best
    }

    pub fn sample(&self, w: &Expr, t: f64) -> ScalarField {
        (0..self.geo.len())
            .map(|node| w.value(&self.geo.grid.coords(node), t))
            .collect()
    }

    pub fn boundary_nodes(&self) -> Vec<usize> {
        (0..self.geo.len()).filter(|&n| self.geo.grid.is_boundary(n)).collect()
    }

    pub fn interior_nodes(&self) -> Vec<usize> {
        (0..self.geo.len()).filter(|&n| !self.geo.grid.is_boundary(n)).collect()
    }

    /// `count + 1` equispaced times covering `[0, T]`.
    pub fn time_ladder(&self, count: usize) -> Vec<f64> {
        let count = count.max(1);
        (0..=count).map(|j| self.horizon * j as f64 / count as f64).collect()
    }

    /// Same problem on a different chart (used by refinement studies).
    pub fn with_geometry(&self, geo: ChartGeometry) -> Result<Self, OperatorError> {
        Self::new(ProblemParts {
            name: self.name.clone(),
            geo,
            op: self.op,
            a: self.a.clone(),
            psi: self.psi.clone(),
            phi: self.phi.clone(),
            sub: self.sub.clone(),
            horizon: self.horizon,
            exact: self.exact.clone(),
            growth: self.growth,
            sample_box: self.sample_box,
            sub_matches_boundary: self.sub_matches_boundary,
        })
    }
}
