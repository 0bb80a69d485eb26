//! Metric tensors: analytic families with exact derivatives, or nodal tables.

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use super::grid::ChartGrid;
use super::GeometryError;
use crate::expr::Expr;

/// Smallest admissible eigenvalue of `g` at any node.
pub const SPD_FLOOR: f64 = 1e-10;

/// Analytic metric families.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum MetricKind {
    Flat,
    /// `g = e^{2w} δ` with `w` a time-independent expression.
    Conformal { factor: Expr },
    /// Round sphere of the given radius in `(θ, φ)`.
    SpherePatch {
        #[serde(default = "one")]
        radius: f64,
    },
    /// `flat_dims` Euclidean coordinates followed by a sphere patch.
    Product { flat_dims: usize, #[serde(default = "one")] radius: f64 },
    /// Flat plane in polar coordinates `(r, θ)`: `g = diag(1, r²)`.
    Polar,
}

fn one() -> f64 {
    1.0
}

/// `g`, `∂_k g` and `∂_k∂_l g` at a point.
#[derive(Debug, Clone)]
pub struct MetricJet {
    pub g: DMatrix<f64>,
    pub dg: Vec<DMatrix<f64>>,
    pub ddg: Vec<Vec<DMatrix<f64>>>,
}

impl MetricJet {
    fn flat(n: usize) -> Self {
        Self {
            g: DMatrix::identity(n, n),
            dg: vec![DMatrix::zeros(n, n); n],
            ddg: vec![vec![DMatrix::zeros(n, n); n]; n],
        }
    }
}

impl MetricKind {
    /// Chart dimension the metric requires, if fixed.
    pub fn required_dim(&self) -> Option<usize> {
        match self {
            MetricKind::Flat | MetricKind::Conformal { .. } => None,
            MetricKind::SpherePatch { .. } | MetricKind::Polar => Some(2),
            MetricKind::Product { flat_dims, .. } => Some(flat_dims + 2),
        }
    }

    pub fn label(&self) -> &'static str {
        match self {
            MetricKind::Flat => "flat",
            MetricKind::Conformal { .. } => "conformal",
            MetricKind::SpherePatch { .. } => "sphere_patch",
            MetricKind::Product { .. } => "product",
            MetricKind::Polar => "polar",
        }
    }

    pub fn jet(&self, x: &[f64]) -> MetricJet {
        let n = x.len();
        match self {
            MetricKind::Flat => MetricJet::flat(n),
            MetricKind::Conformal { factor } => {
                let w = factor.jet(x, 0.0);
                let e = (2.0 * w.value).exp();
                let id = DMatrix::<f64>::identity(n, n);
                MetricJet {
                    g: &id * e,
                    dg: (0..n).map(|k| &id * (2.0 * w.grad[k] * e)).collect(),
                    ddg: (0..n)
                        .map(|k| {
                            (0..n)
                                .map(|l| {
                                    &id * ((4.0 * w.grad[k] * w.grad[l] + 2.0 * w.hess[(k, l)]) * e)
                                })
                                .collect()
                        })
                        .collect(),
                }
            }
            MetricKind::SpherePatch { radius } => sphere_jet(n, 0, *radius, x),
            MetricKind::Product { flat_dims, radius } => sphere_jet(n, *flat_dims, *radius, x),
            MetricKind::Polar => {
                let mut jet = MetricJet::flat(n);
                let r = x[0];
                jet.g[(1, 1)] = r * r;
                jet.dg[0][(1, 1)] = 2.0 * r;
                jet.ddg[0][0][(1, 1)] = 2.0;
                jet
            }
        }
    }
}

/// Sphere factor occupying coordinates `off` (θ) and `off + 1` (φ).
fn sphere_jet(n: usize, off: usize, a: f64, x: &[f64]) -> MetricJet {
    let mut jet = MetricJet::flat(n);
    let th = x[off];
    let a2 = a * a;
    jet.g[(off, off)] = a2;
    jet.g[(off + 1, off + 1)] = a2 * th.sin().powi(2);
    jet.dg[off][(off + 1, off + 1)] = a2 * (2.0 * th).sin();
    jet.ddg[off][off][(off + 1, off + 1)] = 2.0 * a2 * (2.0 * th).cos();
    jet
}

/// Nodal metric with its inverse and coordinate derivatives.
#[derive(Debug, Clone)]
pub struct MetricField {
    pub kind: Option<MetricKind>,
    pub n: usize,
    pub g: Vec<DMatrix<f64>>,
    pub g_inv: Vec<DMatrix<f64>>,
    /// `dg[node][k] = ∂_k g`.
    pub dg: Vec<Vec<DMatrix<f64>>>,
    /// `ddg[node][k][l] = ∂_k∂_l g`.
    pub ddg: Vec<Vec<Vec<DMatrix<f64>>>>,
}

fn check_spd(g: &DMatrix<f64>, node: usize) -> Result<(), GeometryError> {
    let sym = (g - g.transpose()).abs().max();
    if sym > 1e-12 * (1.0 + g.abs().max()) {
        return Err(GeometryError::NotSpd {
            node,
            detail: format!("asymmetry {sym:e}"),
        });
    }
    let eig = g.clone().symmetric_eigen();
    let min = eig.eigenvalues.iter().copied().fold(f64::INFINITY, f64::min);
    if !(min > SPD_FLOOR) {
        return Err(GeometryError::NotSpd {
            node,
            detail: format!("min eigenvalue {min:e}"),
        });
    }
    Ok(())
}

fn invert(g: &DMatrix<f64>, node: usize) -> Result<DMatrix<f64>, GeometryError> {
    g.clone()
        .cholesky()
        .map(|c| c.inverse())
        .ok_or_else(|| GeometryError::NotSpd {
            node,
            detail: "Cholesky factorization failed".into(),
        })
}

impl MetricField {
    pub fn new(kind: MetricKind, grid: &ChartGrid) -> Result<Self, GeometryError> {
        let n = grid.dim();
        if let Some(d) = kind.required_dim() {
            if d != n {
                return Err(GeometryError::Validation(format!(
                    "{} metric needs a {d}-dimensional chart, grid has {n}",
                    kind.label()
                )));
            }
        }
        let mut g = Vec::with_capacity(grid.len());
        let mut g_inv = Vec::with_capacity(grid.len());
        let mut dg = Vec::with_capacity(grid.len());
        let mut ddg = Vec::with_capacity(grid.len());
        for node in 0..grid.len() {
            let jet = kind.jet(&grid.coords(node));
            check_spd(&jet.g, node)?;
            g_inv.push(invert(&jet.g, node)?);
            g.push(jet.g);
            dg.push(jet.dg);
            ddg.push(jet.ddg);
        }
        Ok(Self {
            kind: Some(kind),
            n,
            g,
            g_inv,
            dg,
            ddg,
        })
    }

    /// Metric given by nodal values; first and second derivatives by second-order stencils.
    pub fn tabulated(grid: &ChartGrid, g: Vec<DMatrix<f64>>) -> Result<Self, GeometryError> {
        let n = grid.dim();
        if g.len() != grid.len() || g.iter().any(|m| m.nrows() != n || m.ncols() != n) {
            return Err(GeometryError::Validation(format!(
                "tabulated metric needs {} matrices of size {n}x{n}",
                grid.len()
            )));
        }
        let mut g_inv = Vec::with_capacity(grid.len());
        for (node, m) in g.iter().enumerate() {
            check_spd(m, node)?;
            g_inv.push(invert(m, node)?);
        }
        let dg = (0..grid.len())
            .map(|node| {
                (0..n)
                    .map(|k| {
                        let mut d = DMatrix::zeros(n, n);
                        for (j, w) in grid.first_stencil(node, k) {
                            d += &g[j] * w;
                        }
                        d
                    })
                    .collect()
            })
            .collect();
        let ddg = (0..grid.len())
            .map(|node| {
                (0..n)
                    .map(|k| {
                        (0..n)
                            .map(|l| {
                                let mut d = DMatrix::zeros(n, n);
                                for (j, w) in grid.second_stencil(node, k, l) {
                                    d += &g[j] * w;
                                }
                                d
                            })
                            .collect()
                    })
                    .collect()
            })
            .collect();
        Ok(Self {
            kind: None,
            n,
            g,
            g_inv,
            dg,
            ddg,
        })
    }

    /// `⟨a, b⟩_g` of two vectors at a node.
    pub fn inner(&self, node: usize, a: &[f64], b: &[f64]) -> f64 {
        let g = &self.g[node];
        let mut s = 0.0;
        for i in 0..self.n {
            for j in 0..self.n {
                s += g[(i, j)] * a[i] * b[j];
            }
        }
        s
    }

    /// `|p|²_g = g^{ij} p_i p_j` for a covector.
    pub fn covector_norm2(&self, node: usize, p: &[f64]) -> f64 {
        let gi = &self.g_inv[node];
        let mut s = 0.0;
        for i in 0..self.n {
            for j in 0..self.n {
                s += gi[(i, j)] * p[i] * p[j];
            }
        }
        s
    }

    /// Index-raised covector `g^{ij} p_j`.
    pub fn raise(&self, node: usize, p: &[f64]) -> Vec<f64> {
        let gi = &self.g_inv[node];
        (0..self.n)
            .map(|i| (0..self.n).map(|j| gi[(i, j)] * p[j]).sum())
            .collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::expr::ExprTerm;
    use crate::geometry::grid::AxisTopology;

    #[test]
    fn sphere_requires_two_dims() {
        let g = ChartGrid::from_bounds(&[0.5], &[1.5], &[6], &[AxisTopology::Boundary]).unwrap();
        assert!(MetricField::new(MetricKind::SpherePatch { radius: 1.0 }, &g).is_err());
    }

    #[test]
    fn conformal_derivative_matches_closed_form() {
        let w = Expr::new(vec![ExprTerm::monomial(1.0, vec![1])]);
        let jet = MetricKind::Conformal { factor: w }.jet(&[0.3]);
        assert!((jet.g[(0, 0)] - 0.6f64.exp()).abs() < 1e-15);
        assert!((jet.dg[0][(0, 0)] - 2.0 * 0.6f64.exp()).abs() < 1e-14);
        assert!((jet.ddg[0][0][(0, 0)] - 4.0 * 0.6f64.exp()).abs() < 1e-14);
    }

    #[test]
    fn degenerate_polar_origin_rejected() {
        let g = ChartGrid::from_bounds(
            &[0.0, 0.0],
            &[1.0, 1.0],
            &[5, 5],
            &[AxisTopology::Boundary, AxisTopology::Boundary],
        )
        .unwrap();
        assert!(matches!(
            MetricField::new(MetricKind::Polar, &g),
            Err(GeometryError::NotSpd { .. })
        ));
    }
}
