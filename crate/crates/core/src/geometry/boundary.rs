//! Adapted frames and second fundamental form on coordinate faces.

use nalgebra::DMatrix;

use super::connection::ConnectionField;
use super::grid::ChartGrid;
use super::metric::MetricField;
use super::GeometryError;

/// Frame data at one boundary node on one face.
#[derive(Debug, Clone)]
pub struct BoundaryNode {
    pub node: usize,
    /// Axis normal to the face.
    pub axis: usize,
    pub low_side: bool,
    /// Columns `e_1, …, e_n` in chart components; `e_n` is the inward unit normal.
    pub frame: DMatrix<f64>,
    /// `Π(e_α, e_β)` for `α, β < n`, with respect to the inward normal.
    pub pi: DMatrix<f64>,
}

#[derive(Debug, Clone)]
pub struct BoundaryFrame {
    /// One entry per `(node, face)`; corner nodes appear once per face.
    pub entries: Vec<BoundaryNode>,
}

impl BoundaryFrame {
    /// Largest `|e_aᵀ g e_b − δ_ab|` over all entries.
    pub fn orthonormality_defect(&self, metric: &MetricField) -> f64 {
        self.entries
            .iter()
            .map(|e| {
                let gram = e.frame.transpose() * &metric.g[e.node] * &e.frame;
                let n = gram.nrows();
                (gram - DMatrix::<f64>::identity(n, n)).abs().max()
            })
            .fold(0.0, f64::max)
    }

    /// Entry for the face of `axis` at `node`, if present.
    pub fn find(&self, node: usize, axis: usize) -> Option<&BoundaryNode> {
        self.entries.iter().find(|e| e.node == node && e.axis == axis)
    }
}

/// Inward unit normal, tangential frame and `Π` on the face `x^axis = const`.
pub fn face_frame(
    metric: &MetricField,
    connection: &ConnectionField,
    node: usize,
    axis: usize,
    low_side: bool,
) -> BoundaryNode {
    let n = metric.n;
    let gi = &metric.g_inv[node];
    let sign = if low_side { 1.0 } else { -1.0 };
    let norm = gi[(axis, axis)].sqrt();
    let normal: Vec<f64> = (0..n).map(|i| sign * gi[(i, axis)] / norm).collect();

    let mut tangents: Vec<Vec<f64>> = Vec::with_capacity(n - 1);
    for b in (0..n).filter(|&b| b != axis) {
        let mut v = vec![0.0; n];
        v[b] = 1.0;
        for t in &tangents {
            let proj = metric.inner(node, &v, t);
            for i in 0..n {
                v[i] -= proj * t[i];
            }
        }
        let len = metric.inner(node, &v, &v).sqrt();
        for x in &mut v {
            *x /= len;
        }
        tangents.push(v);
    }

    let mut frame = DMatrix::zeros(n, n);
    for (c, t) in tangents.iter().enumerate() {
        for i in 0..n {
            frame[(i, c)] = t[i];
        }
    }
    for i in 0..n {
        frame[(i, n - 1)] = normal[i];
    }

    // Π(X,Y) = g(∇_X Y, N) = sign · Γ^axis_ij X^i Y^j / √g^{aa}
    let mut pi = DMatrix::zeros(n - 1, n - 1);
    for a in 0..n - 1 {
        for b in 0..n - 1 {
            let mut s = 0.0;
            for i in 0..n {
                for j in 0..n {
                    s += connection.gamma(node, axis, i, j) * tangents[a][i] * tangents[b][j];
                }
            }
            pi[(a, b)] = sign * s / norm;
        }
    }
    BoundaryNode {
        node,
        axis,
        low_side,
        frame,
        pi,
    }
}

/// Adapted frames at every boundary node of the chart.
pub fn boundary_frame(
    metric: &MetricField,
    connection: &ConnectionField,
    grid: &ChartGrid,
) -> Result<BoundaryFrame, GeometryError> {
    if !grid.has_boundary() {
        return Err(GeometryError::NoBoundary);
    }
    let mut entries = Vec::new();
    for node in 0..grid.len() {
        for (axis, low) in grid.faces(node) {
            entries.push(face_frame(metric, connection, node, axis, low));
        }
    }
    Ok(BoundaryFrame { entries })
}

/// Metric-weighted straight-line distance `ρ(x) ≈ dist(x, x_0)` using `g(x_0)`.
pub fn chart_distance(metric: &MetricField, grid: &ChartGrid, x0: usize, x: usize) -> f64 {
    let a = grid.coords(x0);
    let b = grid.coords(x);
    let d: Vec<f64> = (0..grid.dim())
        .map(|k| {
            let mut v = b[k] - a[k];
            if grid.is_periodic(k) {
                let p = grid.period(k);
                v -= p * (v / p).round();
            }
            v
        })
        .collect();
    metric.inner(x0, &d, &d).max(0.0).sqrt()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::connection::christoffel;
    use crate::geometry::grid::AxisTopology;
    use crate::geometry::metric::MetricKind;
    use std::f64::consts::PI;

    #[test]
    fn straight_boundary_has_zero_pi() {
        let grid = ChartGrid::from_bounds(
            &[0.0, 0.0],
            &[1.0, 1.0],
            &[6, 6],
            &[AxisTopology::Periodic, AxisTopology::Boundary],
        )
        .unwrap();
        let m = MetricField::new(MetricKind::Flat, &grid).unwrap();
        let c = christoffel(&m, &grid);
        let bf = boundary_frame(&m, &c, &grid).unwrap();
        assert!(bf.entries.iter().all(|e| e.pi.abs().max() == 0.0));
        assert!(bf.orthonormality_defect(&m) < 1e-12);
    }

    #[test]
    fn annulus_pi_signs() {
        let grid = ChartGrid::from_bounds(
            &[1.0, 0.0],
            &[2.0, 2.0 * PI],
            &[9, 16],
            &[AxisTopology::Boundary, AxisTopology::Periodic],
        )
        .unwrap();
        let m = MetricField::new(MetricKind::Polar, &grid).unwrap();
        let c = christoffel(&m, &grid);
        let bf = boundary_frame(&m, &c, &grid).unwrap();
        for e in &bf.entries {
            let r = grid.coords(e.node)[0];
            let expect = if e.low_side { -1.0 / r } else { 1.0 / r };
            assert!((e.pi[(0, 0)] - expect).abs() < 1e-12);
            // inward normal: +∂_r at r = 1, −∂_r at r = 2
            assert_eq!(e.frame[(0, 1)], if e.low_side { 1.0 } else { -1.0 });
        }
        assert!(bf.orthonormality_defect(&m) < 1e-12);
    }

    #[test]
    fn torus_has_no_boundary() {
        let grid =
            ChartGrid::from_bounds(&[0.0], &[1.0], &[8], &[AxisTopology::Periodic]).unwrap();
        let m = MetricField::new(MetricKind::Flat, &grid).unwrap();
        let c = christoffel(&m, &grid);
        assert!(matches!(boundary_frame(&m, &c, &grid), Err(GeometryError::NoBoundary)));
    }

    #[test]
    fn distance_wraps_periodic_axes() {
        let grid = ChartGrid::from_bounds(&[0.0], &[1.0], &[10], &[AxisTopology::Periodic]).unwrap();
        let m = MetricField::new(MetricKind::Flat, &grid).unwrap();
        assert!((chart_distance(&m, &grid, 0, 9) - 0.1).abs() < 1e-14);
    }
}
