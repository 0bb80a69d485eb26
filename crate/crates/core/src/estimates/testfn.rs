//! The second-derivative test function
//! `W = max (∇_ξξ u + A^{ξξ}) e^{δ|∇u|²/2 + b(u̲ − u)}` over unit `ξ`.

use rayon::prelude::*;
use serde::Serialize;

use super::{check_nonempty, sampled_sub, EstimateError};
use crate::geometry::generalized_eigen;
use crate::operator::{assemble_node, ProblemSpec};
use crate::solver::Trajectory;

/// Relative tolerance for counting tied maximizers.
pub const TIE_TOL: f64 = 1e-12;

#[derive(Debug, Clone, Serialize)]
pub struct TestFunctionState {
    pub delta: f64,
    pub b: f64,
    /// `W` integrand per stored time and node.
    #[serde(skip)]
    pub values: Vec<Vec<f64>>,
    pub max: f64,
    /// `(node, time index)` of the lowest-index maximizer.
    pub argmax: (usize, usize),
    pub t_star: f64,
    pub x_star: Vec<f64>,
    /// Unit eigenvector realizing the maximum, in chart components.
    pub xi_star: Vec<f64>,
    /// The maximizer lies on the parabolic boundary.
    pub on_parabolic_boundary: bool,
    /// Samples within the tie tolerance of the maximum.
    pub ties: usize,
}

/// `sup(u̲ − u)` over the trajectory.
pub fn max_sub_excess(problem: &ProblemSpec, traj: &Trajectory) -> f64 {
    sampled_sub(problem, traj)
        .iter()
        .zip(&traj.states)
        .flat_map(|(s, u)| s.iter().zip(u).map(|(a, b)| a - b))
        .fold(f64::NEG_INFINITY, f64::max)
}

/// `b` defaults to `1 + sup(u̲ − u)`.
pub fn test_function_w(
    problem: &ProblemSpec,
    traj: &Trajectory,
    delta: f64,
    b: Option<f64>,
) -> Result<TestFunctionState, EstimateError> {
    check_nonempty(traj)?;
    let b = b.unwrap_or_else(|| 1.0 + max_sub_excess(problem, traj).max(0.0));
    if !(delta > 0.0 && delta < 1.0 && b >= 1.0) {
        return Err(EstimateError::Precondition(format!(
            "test function needs b >= 1 > delta > 0, got delta = {delta}, b = {b}"
        )));
    }
    let subs = sampled_sub(problem, traj);
    let geo = &problem.geo;
    let mut values = Vec::with_capacity(traj.len());
    let mut vectors = Vec::with_capacity(traj.len());
    for (m, u) in traj.states.iter().enumerate() {
        let t = traj.times[m];
        let per: Vec<(f64, Vec<f64>)> = (0..geo.len())
            .into_par_iter()
            .map(|node| {
                let (umat, p) = assemble_node(u, t, problem, node);
                let e = match generalized_eigen(&umat, &geo.metric.g[node]) {
                    Ok(e) => e,
                    Err(_) => return (f64::NAN, vec![f64::NAN; geo.dim()]),
                };
                let grad2 = geo.metric.covector_norm2(node, &p);
                let weight = (0.5 * delta * grad2 + b * (subs[m][node] - u[node])).exp();
                (e.values[0] * weight, e.vectors.column(0).iter().copied().collect())
            })
            .collect();
        let (v, x): (Vec<f64>, Vec<Vec<f64>>) = per.into_iter().unzip();
        values.push(v);
        vectors.push(x);
    }
    let mut argmax = (0, 0);
    let mut max = f64::NEG_INFINITY;
    for (m, row) in values.iter().enumerate() {
        for (node, &w) in row.iter().enumerate() {
            if w > max {
                max = w;
                argmax = (node, m);
            }
        }
    }
    let scale = max.abs().max(1.0);
    let ties = values
        .iter()
        .flatten()
        .filter(|&&w| (w - max).abs() <= TIE_TOL * scale)
        .count();
    let (node, m) = argmax;
    Ok(TestFunctionState {
        delta,
        b,
        max,
        argmax,
        t_star: traj.times[m],
        x_star: geo.grid.coords(node),
        xi_star: vectors[m][node].clone(),
        on_parabolic_boundary: m == 0 || geo.grid.is_boundary(node),
        ties,
        values,
    })
}
