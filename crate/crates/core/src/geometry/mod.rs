//! Discretized Riemannian charts.

pub mod boundary;
pub mod commutation;
pub mod connection;
pub mod eigen;
pub mod grid;
pub mod metric;

use nalgebra::DMatrix;
use thiserror::Error;

pub use boundary::{boundary_frame, chart_distance, BoundaryFrame, BoundaryNode};
pub use commutation::{commutation_residual, CommutationResidual};
pub use connection::{christoffel, riemann, ConnectionField};
pub use eigen::{generalized_eigen, jacobi_symmetric, spectral_norm, GeneralizedEigen};
pub use grid::{AxisTopology, ChartGrid, ScalarField, Stencil, TensorField2};
pub use metric::{MetricField, MetricKind};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum GeometryError {
    #[error("validation error: {0}")]
    Validation(String),
    #[error("metric not positive definite at node {node}: {detail}")]
    NotSpd { node: usize, detail: String },
    #[error("grid has no boundary (every axis is periodic)")]
    NoBoundary,
}

/// Grid, metric and connection (with curvature) of one chart.
#[derive(Debug, Clone)]
pub struct ChartGeometry {
    pub grid: ChartGrid,
    pub metric: MetricField,
    pub connection: ConnectionField,
}

impl ChartGeometry {
    pub fn new(grid: ChartGrid, kind: MetricKind) -> Result<Self, GeometryError> {
        let metric = MetricField::new(kind, &grid)?;
        Ok(Self::from_metric(grid, metric))
    }

    pub fn from_metric(grid: ChartGrid, metric: MetricField) -> Self {
        let connection = riemann(&metric, &christoffel(&metric, &grid), &grid);
        Self {
            grid,
            metric,
            connection,
        }
    }

    pub fn dim(&self) -> usize {
        self.grid.dim()
    }

    pub fn len(&self) -> usize {
        self.grid.len()
    }

    pub fn is_empty(&self) -> bool {
        self.grid.is_empty()
    }

    /// Covariant Hessian at one node.
    pub fn hessian_at(&self, v: &[f64], node: usize) -> DMatrix<f64> {
        hessian_at(v, &self.connection, &self.grid, node)
    }
}

/// `∇_ij v = ∂_ij v − Γ^k_ij ∂_k v` at one node.
pub fn hessian_at(v: &[f64], connection: &ConnectionField, grid: &ChartGrid, node: usize) -> DMatrix<f64> {
    let n = grid.dim();
    let grad = grid.gradient_at(v, node);
    let mut h = DMatrix::zeros(n, n);
    for i in 0..n {
        for j in i..n {
            let d: f64 = grid
                .second_stencil(node, i, j)
                .iter()
                .map(|&(m, w)| w * v[m])
                .sum();
            let c: f64 = (0..n).map(|k| connection.gamma(node, k, i, j) * grad[k]).sum();
            h[(i, j)] = d - c;
            h[(j, i)] = d - c;
        }
    }
    h
}

/// Covariant Hessian of a nodal field.
pub fn covariant_hessian(v: &[f64], connection: &ConnectionField, grid: &ChartGrid) -> TensorField2 {
    TensorField2 {
        n: grid.dim(),
        values: (0..grid.len()).map(|node| hessian_at(v, connection, grid, node)).collect(),
    }
}

/// Covariant Hessian of an analytic function from its coordinate jet.
pub fn analytic_hessian(grad: &[f64], hess: &DMatrix<f64>, gamma: &[f64]) -> DMatrix<f64> {
    let n = grad.len();
    DMatrix::from_fn(n, n, |i, j| {
        hess[(i, j)] - (0..n).map(|k| gamma[(k * n + i) * n + j] * grad[k]).sum::<f64>()
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::PI;

    fn flat_square(n: usize) -> ChartGeometry {
        let grid = ChartGrid::from_bounds(
            &[0.0, 0.0],
            &[1.0, 1.0],
            &[n, n],
            &[AxisTopology::Boundary, AxisTopology::Boundary],
        )
        .unwrap();
        ChartGeometry::new(grid, MetricKind::Flat).unwrap()
    }

    fn sphere(n: usize) -> ChartGeometry {
        let grid = ChartGrid::from_bounds(
            &[PI / 4.0, 0.0],
            &[PI / 4.0 + 1.0, 1.0],
            &[n, n],
            &[AxisTopology::Boundary, AxisTopology::Boundary],
        )
        .unwrap();
        ChartGeometry::new(grid, MetricKind::SpherePatch { radius: 1.0 }).unwrap()
    }

    #[test]
    fn flat_hessian_examples() {
        let geo = flat_square(7);
        let sq = geo.grid.sample(|x| x[0] * x[0]);
        let xy = geo.grid.sample(|x| x[0] * x[1]);
        let h1 = covariant_hessian(&sq, &geo.connection, &geo.grid);
        let h2 = covariant_hessian(&xy, &geo.connection, &geo.grid);
        for node in 0..geo.len() {
            assert!((h1.at(node) - DMatrix::from_row_slice(2, 2, &[2.0, 0.0, 0.0, 0.0])).abs().max() < 1e-9);
            assert!((h2.at(node)[(0, 1)] - 1.0).abs() < 1e-10);
        }
    }

    #[test]
    fn sphere_hessian_of_cos_theta_converges() {
        let mut errs = Vec::new();
        for n in [17, 33, 65] {
            let geo = sphere(n);
            let v = geo.grid.sample(|x| x[0].cos());
            let h = covariant_hessian(&v, &geo.connection, &geo.grid);
            let mut e = 0.0f64;
            for node in 0..geo.len() {
                let th = geo.grid.coords(node)[0];
                e = e.max((h.at(node)[(1, 1)] + th.sin().powi(2) * th.cos()).abs());
            }
            errs.push(e);
        }
        for w in errs.windows(2) {
            let rate = (w[0] / w[1]).log2();
            assert!((rate - 2.0).abs() < 0.3, "rate {rate}, errors {errs:?}");
        }
    }

    #[test]
    fn flat_commutation_is_exact() {
        let geo = flat_square(12);
        let v = geo.grid.sample(|x| (2.0 * x[0]).sin() * (x[1] + 0.3).exp());
        for order in [3, 4] {
            let r = commutation_residual(&v, &geo.metric, &geo.connection, &geo.grid, order).unwrap();
            assert!(r.max <= 1e-10, "order {order}: {}", r.max);
            assert!(r.nodes_checked > 0);
        }
    }

    #[test]
    fn sphere_commutation_converges() {
        for order in [3, 4] {
            let mut errs = Vec::new();
            for n in [17, 33, 65] {
                let geo = sphere(n);
                let v = geo.grid.sample(|x| x[0].cos() + 0.3 * (x[0] * x[1]).sin());
                errs.push(commutation_residual(&v, &geo.metric, &geo.connection, &geo.grid, order).unwrap().max);
            }
            let rate = (errs[0] / errs[2]).log2() / 2.0;
            assert!((rate - 2.0).abs() < 0.3, "order {order}: rate {rate}, errors {errs:?}");
        }
    }

    #[test]
    fn bad_order_rejected() {
        let geo = flat_square(6);
        let v = vec![0.0; geo.len()];
        assert!(commutation_residual(&v, &geo.metric, &geo.connection, &geo.grid, 2).is_err());
    }
}
