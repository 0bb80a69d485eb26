//! Refinement studies against an analytic exact solution.

use serde::{Deserialize, Serialize};

use super::{solve_ibvp, SolverConfig, SolverError};
use crate::operator::{OperatorError, ProblemSpec};

/// Errors at or below this level count as exact representation.
pub const MACHINE_ERROR: f64 = 1e-10;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct MmsPlan {
    /// Grid refinement factors for the spatial ladder, coarse to fine.
    pub spatial_scales: Vec<usize>,
    /// Spatial runs use `Δt = dt_factor · h²`.
    pub dt_factor: f64,
    /// Refinement factor of the fixed grid used for the temporal ladder.
    pub temporal_scale: usize,
    /// `Δt` ladder, coarse to fine.
    pub temporal_dts: Vec<f64>,
}

impl Default for MmsPlan {
    fn default() -> Self {
        Self {
            spatial_scales: vec![1, 2, 4],
            dt_factor: 0.5,
            temporal_scale: 4,
            temporal_dts: vec![0.1, 0.05, 0.025],
        }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct ErrorSample {
    pub scale: usize,
    pub nodes: Vec<usize>,
    pub h: f64,
    pub dt: f64,
    pub steps: usize,
    /// Max-norm error against the exact solution at the horizon.
    pub error: f64,
    pub max_newton_iterations: usize,
    pub min_margin: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct RateReport {
    pub spatial: Vec<ErrorSample>,
    pub temporal: Vec<ErrorSample>,
    pub spatial_rate: Option<f64>,
    pub temporal_rate: Option<f64>,
    /// Errors decrease along each ladder.
    pub reliable: bool,
    /// Every error is at machine level; rate fits are skipped.
    pub exact_representation: bool,
    pub notes: Vec<String>,
}

/// Least-squares slope of `ln y` against `ln x`.
pub fn log_log_slope(x: &[f64], y: &[f64]) -> f64 {
    let lx: Vec<f64> = x.iter().map(|v| v.ln()).collect();
    let ly: Vec<f64> = y.iter().map(|v| v.ln()).collect();
    let n = lx.len() as f64;
    let mx = lx.iter().sum::<f64>() / n;
    let my = ly.iter().sum::<f64>() / n;
    let sxy: f64 = lx.iter().zip(&ly).map(|(a, b)| (a - mx) * (b - my)).sum();
    let sxx: f64 = lx.iter().map(|a| (a - mx) * (a - mx)).sum();
    sxy / sxx
}

fn run(problem: &ProblemSpec, scale: usize, dt: f64, config: &SolverConfig) -> Result<ErrorSample, SolverError> {
    let exact = problem
        .exact
        .as_ref()
        .ok_or_else(|| SolverError::Config("refinement study needs an exact solution".into()))?;
    let cfg = SolverConfig { dt, ..*config };
    let traj = solve_ibvp(problem, &cfg).map_err(|f| f.error)?;
    let (t, u) = traj.last();
    let reference = problem.sample(exact, t);
    let error = u.iter().zip(&reference).fold(0.0f64, |m, (a, b)| m.max((a - b).abs()));
    Ok(ErrorSample {
        scale,
        nodes: problem.geo.grid.nodes().to_vec(),
        h: problem.geo.grid.spacing().iter().copied().fold(0.0, f64::max),
        dt,
        steps: traj.len() - 1,
        error,
        max_newton_iterations: traj.max_newton_iterations(),
        min_margin: traj.min_margin(),
    })
}

fn decreasing(s: &[ErrorSample]) -> bool {
    s.windows(2).all(|w| w[1].error < w[0].error)
}

/// Spatial order with `Δt ∝ h²` and temporal order on a fixed fine grid.
/// `family(s)` builds the problem on the base grid refined by the factor `s`.
pub fn mms_convergence(
    family: impl Fn(usize) -> Result<ProblemSpec, OperatorError>,
    plan: &MmsPlan,
    config: &SolverConfig,
) -> Result<RateReport, SolverError> {
    let mut spatial = Vec::new();
    for &s in &plan.spatial_scales {
        let p = family(s)?;
        let h = p.geo.grid.spacing().iter().copied().fold(0.0, f64::max);
        spatial.push(run(&p, s, plan.dt_factor * h * h, config)?);
    }
    let mut temporal = Vec::new();
    if !plan.temporal_dts.is_empty() {
        let p = family(plan.temporal_scale)?;
        for &dt in &plan.temporal_dts {
            temporal.push(run(&p, plan.temporal_scale, dt, config)?);
        }
    }
    let mut notes = Vec::new();
    let all = spatial.iter().chain(&temporal);
    let exact_representation = all.clone().count() > 0 && all.clone().all(|s| s.error <= MACHINE_ERROR);
    let fit = |s: &[ErrorSample], key: fn(&ErrorSample) -> f64| -> Option<f64> {
        if s.len() < 2 || exact_representation {
            return None;
        }
        let x: Vec<f64> = s.iter().map(key).collect();
        let y: Vec<f64> = s.iter().map(|e| e.error.max(f64::MIN_POSITIVE)).collect();
        Some(log_log_slope(&x, &y))
    };
    let spatial_rate = fit(&spatial, |s| s.h);
    let temporal_rate = fit(&temporal, |s| s.dt);
    let reliable = exact_representation || (decreasing(&spatial) && decreasing(&temporal));
    if exact_representation {
        notes.push("all errors at machine level; rate fits skipped".into());
    } else if !reliable {
        notes.push("error ladder not monotone; rates unreliable".into());
    }
    if spatial.len() < 2 {
        notes.push("spatial ladder has fewer than two levels".into());
    }
    if temporal.len() < 2 {
        notes.push("temporal ladder has fewer than two levels".into());
    }
    Ok(RateReport {
        spatial,
        temporal,
        spatial_rate,
        temporal_rate,
        reliable,
        exact_representation,
        notes,
    })
}
