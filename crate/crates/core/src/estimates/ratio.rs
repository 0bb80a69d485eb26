//! Interior-versus-parabolic-boundary maxima of `|u|`, `|∇u|`, `|∇²u|`.

use rayon::prelude::*;
use serde::Serialize;

use super::{check_nonempty, max_spacing, EstimateError, NORM_CONVENTION};
use crate::geometry::{hessian_at, spectral_norm};
use crate::operator::ProblemSpec;
use crate::solver::Trajectory;

#[derive(Debug, Clone, Serialize)]
pub struct ResolutionRatios {
    pub nodes: Vec<usize>,
    pub h: f64,
    pub max_u: f64,
    pub max_grad: f64,
    pub max_hess: f64,
    pub boundary_max_grad: f64,
    pub boundary_max_hess: f64,
    /// `max |∇²u| / (1 + max_𝒫 |∇²u|)`.
    pub c2_ratio: f64,
    /// `max |∇u| / (1 + max_𝒫 |∇u|)`.
    pub c1_ratio: f64,
    /// `max |u| + max_𝒫 |∇u|`.
    pub c0_quantity: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct RatioReport {
    pub norm: String,
    /// Coarse to fine.
    pub history: Vec<ResolutionRatios>,
    /// Relative change between the two finest grids.
    pub c2_drift: Option<f64>,
    pub c1_drift: Option<f64>,
    pub notes: Vec<String>,
}

impl RatioReport {
    pub fn finite(&self) -> bool {
        self.history.iter().all(|r| r.c1_ratio.is_finite() && r.c2_ratio.is_finite())
    }

    pub fn drift_within(&self, tol: f64) -> Option<bool> {
        Some(self.c2_drift? < tol && self.c1_drift? < tol)
    }
}

fn one_resolution(problem: &ProblemSpec, traj: &Trajectory) -> ResolutionRatios {
    let geo = &problem.geo;
    // (|u|, |∇u|, |∇²u|, on 𝒫M_T) per sample
    let per: Vec<(f64, f64, f64, bool)> = traj
        .states
        .iter()
        .enumerate()
        .flat_map(|(m, u)| {
            (0..geo.len())
                .into_par_iter()
                .map(move |node| {
                    let p = geo.grid.gradient_at(u, node);
                    let h = hessian_at(u, &geo.connection, &geo.grid, node);
                    let hn = spectral_norm(&h, &geo.metric.g[node]).unwrap_or(f64::NAN);
                    let gn = geo.metric.covector_norm2(node, &p).sqrt();
                    (u[node].abs(), gn, hn, m == 0 || geo.grid.is_boundary(node))
                })
                .collect::<Vec<_>>()
        })
        .collect();
    let fold = |f: fn(&(f64, f64, f64, bool)) -> f64, boundary: bool| {
        per.iter()
            .filter(|s| !boundary || s.3)
            .map(f)
            .fold(0.0f64, f64::max)
    };
    let max_u = fold(|s| s.0, false);
    let max_grad = fold(|s| s.1, false);
    let max_hess = fold(|s| s.2, false);
    let boundary_max_grad = fold(|s| s.1, true);
    let boundary_max_hess = fold(|s| s.2, true);
    ResolutionRatios {
        nodes: geo.grid.nodes().to_vec(),
        h: max_spacing(problem),
        max_u,
        max_grad,
        max_hess,
        boundary_max_grad,
        boundary_max_hess,
        c2_ratio: max_hess / (1.0 + boundary_max_hess),
        c1_ratio: max_grad / (1.0 + boundary_max_grad),
        c0_quantity: max_u + boundary_max_grad,
    }
}

fn drift(coarse: f64, fine: f64) -> f64 {
    let d = (fine - coarse).abs();
    if coarse.abs() > 0.0 { d / coarse.abs() } else { d }
}

/// `runs` are `(problem, trajectory)` pairs ordered coarse to fine.
pub fn ratio_report(runs: &[(&ProblemSpec, &Trajectory)]) -> Result<RatioReport, EstimateError> {
    for (_, traj) in runs {
        check_nonempty(traj)?;
    }
    let history: Vec<ResolutionRatios> = runs.iter().map(|(p, t)| one_resolution(p, t)).collect();
    let mut notes = Vec::new();
    let (c2_drift, c1_drift) = match history.as_slice() {
        [.., a, b] => (Some(drift(a.c2_ratio, b.c2_ratio)), Some(drift(a.c1_ratio, b.c1_ratio))),
        _ => {
            notes.push("drift unavailable: fewer than two resolutions".into());
            (None, None)
        }
    };
    Ok(RatioReport {
        norm: NORM_CONVENTION.into(),
        history,
        c2_drift,
        c1_drift,
        notes,
    })
}
