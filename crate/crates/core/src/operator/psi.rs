//! The right-hand side `ψ(x, t, z, p)` as a sum of atoms.

use std::sync::Arc;

use serde::{Deserialize, Serialize};

use super::afield::AFieldSpec;
use super::NodeCtx;
use crate::expr::Expr;
use crate::geometry::{analytic_hessian, generalized_eigen};
use crate::symfunc::{eval_f, OperatorSpec};

/// Operator data a manufactured source needs; bound when the problem is built.
#[derive(Debug, Clone, PartialEq)]
pub struct SourceModel {
    pub op: OperatorSpec,
    pub a: AFieldSpec,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum PsiTerm {
    Const { value: f64 },
    /// `coeff · z`.
    Z { coeff: f64 },
    /// `coeff · |p|²_g`.
    GradSq { coeff: f64 },
    /// `amp · sin(omega·t + phase)`.
    TimeSin {
        amp: f64,
        omega: f64,
        #[serde(default)]
        phase: f64,
    },
    /// `F[u*] − u*_t` for an analytic `u*`, so that `u*` solves the equation.
    Manufactured {
        exact: Expr,
        #[serde(skip)]
        model: Option<Arc<SourceModel>>,
    },
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct PsiSpec {
    pub terms: Vec<PsiTerm>,
}

impl PsiSpec {
    pub fn constant(c: f64) -> Self {
        Self {
            terms: vec![PsiTerm::Const { value: c }],
        }
    }

    pub fn new(terms: Vec<PsiTerm>) -> Self {
        Self { terms }
    }

    /// Attaches the operator to every manufactured term.
    pub fn bind(&mut self, model: SourceModel) {
        let model = Arc::new(model);
        for t in &mut self.terms {
            if let PsiTerm::Manufactured { model: m, .. } = t {
                *m = Some(model.clone());
            }
        }
    }

    pub fn has_manufactured(&self) -> bool {
        self.terms.iter().any(|t| matches!(t, PsiTerm::Manufactured { .. }))
    }

    /// `ψ(x, t, z, p)`; NaN if a manufactured source is inadmissible at the node.
    pub fn value(&self, ctx: &NodeCtx, z: f64, p: &[f64]) -> f64 {
        self.terms
            .iter()
            .map(|term| match term {
                PsiTerm::Const { value } => *value,
                PsiTerm::Z { coeff } => coeff * z,
                PsiTerm::GradSq { coeff } => coeff * ctx.covector_norm2(p),
                PsiTerm::TimeSin { amp, omega, phase } => amp * (omega * ctx.t + phase).sin(),
                PsiTerm::Manufactured { exact, model } => manufactured(ctx, exact, model.as_deref()),
            })
            .sum()
    }

    pub fn d_z(&self, _ctx: &NodeCtx, _z: f64, _p: &[f64]) -> f64 {
        self.terms
            .iter()
            .map(|term| match term {
                PsiTerm::Z { coeff } => *coeff,
                _ => 0.0,
            })
            .sum()
    }

    pub fn d_p(&self, ctx: &NodeCtx, _z: f64, p: &[f64]) -> Vec<f64> {
        let mut out = vec![0.0; p.len()];
        for term in &self.terms {
            if let PsiTerm::GradSq { coeff } = term {
                for (o, r) in out.iter_mut().zip(ctx.raise(p)) {
                    *o += 2.0 * coeff * r;
                }
            }
        }
        out
    }

    /// `ψ_{p_k p_l} η_k η_l`.
    pub fn pp_quad(&self, ctx: &NodeCtx, eta: &[f64]) -> f64 {
        self.terms
            .iter()
            .map(|term| match term {
                PsiTerm::GradSq { coeff } => 2.0 * coeff * ctx.covector_norm2(eta),
                _ => 0.0,
            })
            .sum()
    }

    pub fn d_t(&self, ctx: &NodeCtx, _z: f64, _p: &[f64]) -> f64 {
        let h = 1e-6;
        self.terms
            .iter()
            .map(|term| match term {
                PsiTerm::TimeSin { amp, omega, phase } => amp * omega * (omega * ctx.t + phase).cos(),
                PsiTerm::Manufactured { exact, model } => {
                    let later = ctx.at_time(ctx.t + h);
                    let earlier = ctx.at_time((ctx.t - h).max(0.0));
                    let dt = later.t - earlier.t;
                    (manufactured(&later, exact, model.as_deref())
                        - manufactured(&earlier, exact, model.as_deref()))
                        / dt
                }
                _ => 0.0,
            })
            .sum()
    }

    /// `p · ∇_x ψ` with `p` held parallel. Only manufactured sources depend on `x`;
    /// their chart derivative is taken from the neighbouring nodes.
    pub fn p_dot_dx(&self, ctx: &NodeCtx, _z: f64, p: &[f64]) -> f64 {
        let praised = ctx.raise(p);
        self.terms
            .iter()
            .map(|term| match term {
                PsiTerm::Manufactured { exact, model } => {
                    let n = p.len();
                    (0..n)
                        .map(|k| {
                            let d: f64 = ctx
                                .geo
                                .grid
                                .first_stencil(ctx.node, k)
                                .iter()
                                .map(|&(m, w)| w * manufactured(&ctx.at_node(m), exact, model.as_deref()))
                                .sum();
                            praised[k] * d
                        })
                        .sum()
                }
                _ => 0.0,
            })
            .sum()
    }
}

fn manufactured(ctx: &NodeCtx, exact: &Expr, model: Option<&SourceModel>) -> f64 {
    let Some(model) = model else {
        return f64::NAN;
    };
    let jet = exact.jet(&ctx.x, ctx.t);
    let h = analytic_hessian(&jet.grad, &jet.hess, ctx.gamma());
    let u = h + model.a.value(ctx, &jet.grad);
    match generalized_eigen(&u, ctx.g()) {
        Ok(e) => eval_f(&model.op, &e.values).map(|f| f - jet.dt).unwrap_or(f64::NAN),
        Err(_) => f64::NAN,
    }
}
