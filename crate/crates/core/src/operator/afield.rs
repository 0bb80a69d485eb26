//! The `(0,2)` tensor `A(x, t, p)`.

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use super::NodeCtx;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum AFieldSpec {
    Zero,
    /// `A = c·g`.
    ConstTimesMetric { c: f64 },
    /// `A = shift·g − iso·(|p|²g − p⊗p) − rank1·p⊗p`, with `iso, rank1 ≥ 0`.
    ConcaveQuadratic {
        #[serde(default)]
        shift: f64,
        #[serde(default)]
        iso: f64,
        #[serde(default)]
        rank1: f64,
    },
    /// Nodal values, independent of `t` and `p`; each row holds `A_ij` row-major.
    UserTable { values: Vec<Vec<f64>> },
}

impl AFieldSpec {
    pub fn label(&self) -> &'static str {
        match self {
            AFieldSpec::Zero => "zero",
            AFieldSpec::ConstTimesMetric { .. } => "const_times_metric",
            AFieldSpec::ConcaveQuadratic { .. } => "concave_quadratic",
            AFieldSpec::UserTable { .. } => "user_table",
        }
    }

    pub fn validate(&self, nodes: usize, n: usize) -> Result<(), String> {
        match self {
            AFieldSpec::ConcaveQuadratic { iso, rank1, .. } => {
                if *iso < 0.0 || *rank1 < 0.0 {
                    return Err(format!(
                        "A.iso and A.rank1 must be >= 0 for concavity, got {iso} and {rank1}"
                    ));
                }
            }
            AFieldSpec::UserTable { values } => {
                if values.len() != nodes {
                    return Err(format!("A.values has {} rows, grid has {nodes} nodes", values.len()));
                }
                for (i, row) in values.iter().enumerate() {
                    if row.len() != n * n {
                        return Err(format!("A.values row {i} has {} entries, expected {}", row.len(), n * n));
                    }
                    for a in 0..n {
                        for b in 0..a {
                            if (row[a * n + b] - row[b * n + a]).abs() > 1e-12 {
                                return Err(format!("A.values row {i} is not symmetric"));
                            }
                        }
                    }
                }
            }
            _ => {}
        }
        Ok(())
    }

    /// `A_ij(x, t, p)` at the node.
    pub fn value(&self, ctx: &NodeCtx, p: &[f64]) -> DMatrix<f64> {
        let n = p.len();
        match self {
            AFieldSpec::Zero => DMatrix::zeros(n, n),
            AFieldSpec::ConstTimesMetric { c } => ctx.g() * *c,
            AFieldSpec::ConcaveQuadratic { shift, iso, rank1 } => {
                let g = ctx.g();
                let p2 = ctx.covector_norm2(p);
                let pp = DMatrix::from_fn(n, n, |i, j| p[i] * p[j]);
                g * (*shift - iso * p2) + &pp * (iso - rank1)
            }
            AFieldSpec::UserTable { values } => {
                DMatrix::from_row_slice(n, n, &values[ctx.node])
            }
        }
    }

    /// `∂A_ij/∂p_k` for each `k`.
    pub fn d_p(&self, ctx: &NodeCtx, p: &[f64]) -> Vec<DMatrix<f64>> {
        let n = p.len();
        match self {
            AFieldSpec::ConcaveQuadratic { iso, rank1, .. } => {
                let g = ctx.g();
                let praised = ctx.raise(p);
                (0..n)
                    .map(|k| {
                        DMatrix::from_fn(n, n, |i, j| {
                            let dpp = if i == k { p[j] } else { 0.0 } + if j == k { p[i] } else { 0.0 };
                            -iso * 2.0 * praised[k] * g[(i, j)] + (iso - rank1) * dpp
                        })
                    })
                    .collect()
            }
            _ => vec![DMatrix::zeros(n, n); n],
        }
    }

    /// `A^{ξξ}_{p_k p_l} η_k η_l` for a vector `ξ` and covector `η`.
    pub fn pp_quad(&self, ctx: &NodeCtx, xi: &[f64], eta: &[f64]) -> f64 {
        match self {
            AFieldSpec::ConcaveQuadratic { iso, rank1, .. } => {
                let xi2 = ctx.vector_norm2(xi);
                let eta2 = ctx.covector_norm2(eta);
                let xe: f64 = xi.iter().zip(eta).map(|(a, b)| a * b).sum();
                -2.0 * iso * (xi2 * eta2 - xe * xe) - 2.0 * rank1 * xe * xe
            }
            _ => 0.0,
        }
    }

    /// `A^{ξη}` for vectors `ξ, η`.
    pub fn bilinear(&self, ctx: &NodeCtx, p: &[f64], xi: &[f64], eta: &[f64]) -> f64 {
        let a = self.value(ctx, p);
        let n = p.len();
        let mut s = 0.0;
        for i in 0..n {
            for j in 0..n {
                s += a[(i, j)] * xi[i] * eta[j];
            }
        }
        s
    }

    /// `p · ∇_x A^{ξξ}`: the partial covariant x-derivative with `p` held parallel,
    /// contracted with the raised `p`. Zero for the metric-built atoms.
    pub fn p_dot_dx(&self, ctx: &NodeCtx, p: &[f64], xi: &[f64]) -> f64 {
        match self {
            AFieldSpec::UserTable { values } => {
                let geo = ctx.geo;
                let n = p.len();
                let node = ctx.node;
                let mat = |m: usize| DMatrix::from_row_slice(n, n, &values[m]);
                let a0 = mat(node);
                let praised = ctx.raise(p);
                let mut s = 0.0;
                for k in 0..n {
                    let mut d = DMatrix::zeros(n, n);
                    for (m, w) in geo.grid.first_stencil(node, k) {
                        d += mat(m) * w;
                    }
                    for i in 0..n {
                        for j in 0..n {
                            let mut c = d[(i, j)];
                            for q in 0..n {
                                c -= geo.connection.gamma(node, q, k, i) * a0[(q, j)]
                                    + geo.connection.gamma(node, q, k, j) * a0[(i, q)];
                            }
                            s += praised[k] * c * xi[i] * xi[j];
                        }
                    }
                }
                s
            }
            _ => 0.0,
        }
    }
}
