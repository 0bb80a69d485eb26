//! Levi-Civita connection and Riemann tensor on a chart.
//!
//! Curvature follows `R(X,Y)Z = −∇_X∇_Y Z + ∇_Y∇_X Z + ∇_{[X,Y]}Z` with
//! `R_ijkl = g(R(e_k,e_l)e_j, e_i)`, the negative of the common physics
//! convention. On the unit sphere this gives `R_θφθφ = −sin²θ`.

use nalgebra::DMatrix;

use super::grid::ChartGrid;
use super::metric::MetricField;

#[derive(Debug, Clone)]
pub struct ConnectionField {
    pub n: usize,
    /// `Γ^k_ij` at `((node·n + k)·n + i)·n + j`.
    pub gamma: Vec<f64>,
    /// `R_ijkl` at `(((node·n + i)·n + j)·n + k)·n + l`; empty until [`riemann`] runs.
    pub curvature: Vec<f64>,
}

impl ConnectionField {
    #[inline]
    pub fn gamma(&self, node: usize, k: usize, i: usize, j: usize) -> f64 {
        let n = self.n;
        self.gamma[((node * n + k) * n + i) * n + j]
    }

    pub fn gamma_at(&self, node: usize) -> &[f64] {
        let s = self.n * self.n * self.n;
        &self.gamma[node * s..(node + 1) * s]
    }

    #[inline]
    pub fn r(&self, node: usize, i: usize, j: usize, k: usize, l: usize) -> f64 {
        let n = self.n;
        self.curvature[(((node * n + i) * n + j) * n + k) * n + l]
    }

    pub fn has_curvature(&self) -> bool {
        !self.curvature.is_empty()
    }

    /// `R^l_{kij} = g^{lm} R_{mkij}`.
    pub fn r_up(&self, metric: &MetricField, node: usize, l: usize, k: usize, i: usize, j: usize) -> f64 {
        let gi = &metric.g_inv[node];
        (0..self.n).map(|m| gi[(l, m)] * self.r(node, m, k, i, j)).sum()
    }

    /// Largest violation of `R_ijkl = −R_jikl = −R_ijlk = R_klij` over all nodes.
    pub fn symmetry_defect(&self) -> f64 {
        if !self.has_curvature() {
            return 0.0;
        }
        let n = self.n;
        let nodes = self.curvature.len() / n.pow(4);
        let mut worst = 0.0f64;
        for node in 0..nodes {
            for i in 0..n {
                for j in 0..n {
                    for k in 0..n {
                        for l in 0..n {
                            let v = self.r(node, i, j, k, l);
                            worst = worst
                                .max((v + self.r(node, j, i, k, l)).abs())
                                .max((v + self.r(node, i, j, l, k)).abs())
                                .max((v - self.r(node, k, l, i, j)).abs());
                        }
                    }
                }
            }
        }
        worst
    }
}

/// `Γ^k_ij = ½ g^{kl}(∂_i g_jl + ∂_j g_il − ∂_l g_ij)` at one point.
pub fn christoffel_point(g_inv: &DMatrix<f64>, dg: &[DMatrix<f64>]) -> Vec<f64> {
    let n = g_inv.nrows();
    let mut out = vec![0.0; n * n * n];
    for k in 0..n {
        for i in 0..n {
            for j in i..n {
                let mut s = 0.0;
                for l in 0..n {
                    s += g_inv[(k, l)] * (dg[i][(j, l)] + dg[j][(i, l)] - dg[l][(i, j)]);
                }
                out[(k * n + i) * n + j] = 0.5 * s;
                out[(k * n + j) * n + i] = 0.5 * s;
            }
        }
    }
    out
}

/// `∂_m Γ^k_ij` at `((m·n + k)·n + i)·n + j` from the metric's second derivatives.
fn christoffel_derivative_point(
    g_inv: &DMatrix<f64>,
    dg: &[DMatrix<f64>],
    ddg: &[Vec<DMatrix<f64>>],
) -> Vec<f64> {
    let n = g_inv.nrows();
    let mut out = vec![0.0; n.pow(4)];
    for m in 0..n {
        let dginv = -(g_inv * &dg[m] * g_inv);
        for k in 0..n {
            for i in 0..n {
                for j in 0..n {
                    let mut s = 0.0;
                    for l in 0..n {
                        let sl = dg[i][(j, l)] + dg[j][(i, l)] - dg[l][(i, j)];
                        let dsl = ddg[m][i][(j, l)] + ddg[m][j][(i, l)] - ddg[m][l][(i, j)];
                        s += dginv[(k, l)] * sl + g_inv[(k, l)] * dsl;
                    }
                    out[((m * n + k) * n + i) * n + j] = 0.5 * s;
                }
            }
        }
    }
    out
}

/// Lowered `R_ijkl` at one point from `Γ` and `∂Γ` (layout of [`christoffel_derivative_point`]).
fn riemann_point(g: &DMatrix<f64>, gamma: &[f64], dgamma: &[f64]) -> Vec<f64> {
    let n = g.nrows();
    let gm = |k: usize, i: usize, j: usize| gamma[(k * n + i) * n + j];
    let dgm = |m: usize, k: usize, i: usize, j: usize| dgamma[((m * n + k) * n + i) * n + j];
    // R^i_jkl with R(∂_k,∂_l)∂_j = R^i_jkl ∂_i
    let mut up = vec![0.0; n.pow(4)];
    for i in 0..n {
        for j in 0..n {
            for k in 0..n {
                for l in 0..n {
                    let mut s = dgm(k, i, l, j) - dgm(l, i, k, j);
                    for m in 0..n {
                        s += gm(i, k, m) * gm(m, l, j) - gm(i, l, m) * gm(m, k, j);
                    }
                    up[((i * n + j) * n + k) * n + l] = -s;
                }
            }
        }
    }
    let mut low = vec![0.0; n.pow(4)];
    for i in 0..n {
        for j in 0..n {
            for k in 0..n {
                for l in 0..n {
                    let mut s = 0.0;
                    for m in 0..n {
                        s += g[(i, m)] * up[((m * n + j) * n + k) * n + l];
                    }
                    low[((i * n + j) * n + k) * n + l] = s;
                }
            }
        }
    }
    low
}

/// Christoffel symbols at every node (curvature left empty).
pub fn christoffel(metric: &MetricField, grid: &ChartGrid) -> ConnectionField {
    let n = metric.n;
    let mut gamma = Vec::with_capacity(grid.len() * n.pow(3));
    for node in 0..grid.len() {
        gamma.extend(christoffel_point(&metric.g_inv[node], &metric.dg[node]));
    }
    ConnectionField {
        n,
        gamma,
        curvature: Vec::new(),
    }
}

/// Adds `R_ijkl` to a connection, using the metric's first and second derivatives.
pub fn riemann(metric: &MetricField, connection: &ConnectionField, grid: &ChartGrid) -> ConnectionField {
    let n = metric.n;
    let mut curvature = Vec::with_capacity(grid.len() * n.pow(4));
    for node in 0..grid.len() {
        let dgamma = christoffel_derivative_point(&metric.g_inv[node], &metric.dg[node], &metric.ddg[node]);
        curvature.extend(riemann_point(&metric.g[node], connection.gamma_at(node), &dgamma));
    }
    ConnectionField {
        n,
        gamma: connection.gamma.clone(),
        curvature,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::expr::{Expr, ExprTerm};
    use crate::geometry::grid::AxisTopology;
    use crate::geometry::metric::MetricKind;
    use std::f64::consts::PI;

    fn sphere_grid(n: usize) -> ChartGrid {
        ChartGrid::from_bounds(
            &[PI / 4.0, 0.0],
            &[PI / 4.0 + 1.0, 1.0],
            &[n, n],
            &[AxisTopology::Boundary, AxisTopology::Boundary],
        )
        .unwrap()
    }

    #[test]
    fn conformal_1d_christoffel_is_one() {
        let grid = ChartGrid::from_bounds(&[-1.0], &[1.0], &[9], &[AxisTopology::Boundary]).unwrap();
        let w = Expr::new(vec![ExprTerm::monomial(1.0, vec![1])]);
        let m = MetricField::new(MetricKind::Conformal { factor: w }, &grid).unwrap();
        let c = christoffel(&m, &grid);
        for node in 0..grid.len() {
            assert!((c.gamma(node, 0, 0, 0) - 1.0).abs() < 1e-14);
        }
    }

    #[test]
    fn sphere_christoffel_and_curvature() {
        let grid = sphere_grid(9);
        let m = MetricField::new(MetricKind::SpherePatch { radius: 1.0 }, &grid).unwrap();
        let c = riemann(&m, &christoffel(&m, &grid), &grid);
        for node in 0..grid.len() {
            let th = grid.coords(node)[0];
            let (s, co) = th.sin_cos();
            assert!((c.gamma(node, 0, 1, 1) + s * co).abs() < 1e-14);
            assert!((c.gamma(node, 1, 0, 1) - co / s).abs() < 1e-14);
            assert!((c.r(node, 0, 1, 0, 1) + s * s).abs() < 1e-13);
            assert!((c.r(node, 0, 1, 1, 0) - s * s).abs() < 1e-13);
        }
        assert!(c.symmetry_defect() < 1e-10);
    }

    #[test]
    fn tabulated_sphere_curvature_converges() {
        let mut errs = Vec::new();
        for n in [17, 33] {
            let grid = sphere_grid(n);
            let exact = MetricField::new(MetricKind::SpherePatch { radius: 1.0 }, &grid).unwrap();
            let tab = MetricField::tabulated(&grid, exact.g.clone()).unwrap();
            let c = riemann(&tab, &christoffel(&tab, &grid), &grid);
            let mut e = 0.0f64;
            for node in 0..grid.len() {
                let s = grid.coords(node)[0].sin();
                e = e.max((c.r(node, 0, 1, 0, 1) + s * s).abs());
            }
            errs.push(e);
        }
        let rate = (errs[0] / errs[1]).log2();
        assert!(rate > 1.5, "observed rate {rate}, errors {errs:?}");
    }

    #[test]
    fn product_mixed_components_vanish() {
        let grid = ChartGrid::from_bounds(
            &[0.0, 0.8, 0.0],
            &[1.0, 1.8, 1.0],
            &[5, 5, 5],
            &[AxisTopology::Periodic, AxisTopology::Boundary, AxisTopology::Boundary],
        )
        .unwrap();
        let m = MetricField::new(MetricKind::Product { flat_dims: 1, radius: 1.0 }, &grid).unwrap();
        let c = riemann(&m, &christoffel(&m, &grid), &grid);
        for node in 0..grid.len() {
            for j in 0..3 {
                for k in 0..3 {
                    for l in 0..3 {
                        assert_eq!(c.r(node, 0, j, k, l), 0.0);
                    }
                }
            }
        }
    }
}
