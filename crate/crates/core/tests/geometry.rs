use std::f64::consts::PI;

use hessflow::geometry::{
    boundary_frame, covariant_hessian, generalized_eigen, AxisTopology, ChartGeometry, ChartGrid, MetricKind,
};
use nalgebra::DMatrix;
use proptest::prelude::*;

fn annulus(nr: usize, nt: usize) -> ChartGeometry {
    let grid = ChartGrid::from_bounds(
        &[1.0, 0.0],
        &[2.0, 2.0 * PI],
        &[nr, nt],
        &[AxisTopology::Boundary, AxisTopology::Periodic],
    )
    .unwrap();
    ChartGeometry::new(grid, MetricKind::Polar).unwrap()
}

fn sym(entries: &[f64], n: usize) -> DMatrix<f64> {
    let m = DMatrix::from_row_slice(n, n, &entries[..n * n]);
    (&m + m.transpose()) * 0.5
}

proptest! {
    #[test]
    fn eigenvalues_invariant_under_congruence(
        s in prop::collection::vec(-2.0f64..2.0, 9),
        a in prop::collection::vec(-1.0f64..1.0, 9),
        m in prop::collection::vec(-1.0f64..1.0, 9),
        n in 2usize..=3,
    ) {
        let s = sym(&s, n);
        let a = DMatrix::from_row_slice(n, n, &a[..n * n]);
        let g = &a * a.transpose() + DMatrix::identity(n, n);
        let m = DMatrix::from_row_slice(n, n, &m[..n * n]) + DMatrix::identity(n, n) * 2.5;
        let e1 = generalized_eigen(&s, &g).unwrap();
        let e2 = generalized_eigen(&(m.transpose() * &s * &m), &(m.transpose() * &g * &m)).unwrap();
        let scale = e1.values.iter().fold(1.0f64, |x, v| x.max(v.abs()));
        for (x, y) in e1.values.iter().zip(&e2.values) {
            prop_assert!((x - y).abs() <= 1e-10 * scale, "{:?} vs {:?}", e1.values, e2.values);
        }
        // eigenvectors are g-orthonormal
        let gram = e1.vectors.transpose() * &g * &e1.vectors;
        prop_assert!((gram - DMatrix::identity(n, n)).abs().max() < 1e-10);
    }
}

#[test]
fn polar_hessian_of_r_squared_is_twice_the_metric() {
    // r² = x² + y², whose Euclidean Hessian is 2δ, is 2g in polar components.
    let geo = annulus(17, 32);
    let v = geo.grid.sample(|x| x[0] * x[0]);
    let h = covariant_hessian(&v, &geo.connection, &geo.grid);
    for node in 0..geo.len() {
        if geo.grid.boundary_distance(node) == 0 {
            continue;
        }
        let diff = h.at(node) - &geo.metric.g[node] * 2.0;
        assert!(diff.abs().max() < 1e-10, "node {node}: {diff}");
    }
}

#[test]
fn annulus_frame_is_orthonormal_with_inward_normal() {
    let geo = annulus(9, 16);
    let frame = boundary_frame(&geo.metric, &geo.connection, &geo.grid).unwrap();
    assert!(frame.orthonormality_defect(&geo.metric) < 1e-10);
    assert_eq!(frame.entries.len(), 2 * 16);
    for e in &frame.entries {
        let normal_r = e.frame[(0, 1)];
        let r = geo.grid.coords(e.node)[0];
        let inward = if r < 1.5 { 1.0 } else { -1.0 };
        assert!((normal_r - inward).abs() < 1e-12);
        // circles of radius r have second fundamental form ±1/r
        assert!((e.pi[(0, 0)].abs() - 1.0 / r).abs() < 1e-10, "pi = {}", e.pi);
    }
}

#[test]
fn connection_symmetries_hold_on_sphere() {
    let grid = ChartGrid::from_bounds(
        &[PI / 4.0, 0.0],
        &[PI / 4.0 + 1.0, 1.0],
        &[9, 9],
        &[AxisTopology::Boundary, AxisTopology::Boundary],
    )
    .unwrap();
    let geo = ChartGeometry::new(grid, MetricKind::SpherePatch { radius: 2.0 }).unwrap();
    assert!(geo.connection.symmetry_defect() < 1e-10);
    // sectional curvature 1/a², with the curvature sign R = −R_std
    for node in 0..geo.len() {
        let g = &geo.metric.g[node];
        let k = geo.connection.r(node, 0, 1, 0, 1) / (g[(0, 0)] * g[(1, 1)]);
        assert!((k + 0.25).abs() < 1e-12, "K = {k}");
    }
}

#[test]
fn too_few_nodes_rejected() {
    let r = ChartGrid::from_bounds(&[0.0], &[1.0], &[3], &[AxisTopology::Boundary]);
    assert!(r.is_err());
}
