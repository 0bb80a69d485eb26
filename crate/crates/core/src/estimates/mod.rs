//! Discrete audits of the barrier inequality, the second-derivative test
//! function, the boundary constructions and the estimate ratios.
//!
//! Every audit reads a solved [`Trajectory`] and reports margins; nothing here
//! feeds back into the solver. Hessian norms are spectral norms with respect
//! to `g`.

pub mod barrier;
pub mod boundary;
pub mod psibarrier;
pub mod ratio;
pub mod testfn;

use thiserror::Error;

use crate::geometry::GeometryError;
use crate::operator::{OperatorError, ProblemSpec};
use crate::solver::Trajectory;

pub use barrier::{barrier_gap, BarrierAudit, StepGap};
pub use boundary::{boundary_mr, tangential_identity_residual, BoundaryAudit, PhiAudit, RungAudit, TangentialResidual};
pub use psibarrier::{psi_barrier_search, PsiBarrierResult, PsiCoefficients, PsiGrid};
pub use ratio::{ratio_report, RatioReport, ResolutionRatios};
pub use testfn::{test_function_w, TestFunctionState};

/// Norm convention stated in every audit header.
pub const NORM_CONVENTION: &str = "|D2u| is the spectral norm of the covariant Hessian with respect to g";

#[derive(Debug, Clone, PartialEq, Error)]
pub enum EstimateError {
    #[error("precondition failed: {0}")]
    Precondition(String),
    #[error("the chart has no boundary")]
    NoBoundary,
    #[error("the trajectory is empty")]
    EmptyTrajectory,
    #[error(transparent)]
    Operator(#[from] OperatorError),
    #[error(transparent)]
    Geometry(#[from] GeometryError),
}

/// `u̲(·, t)` sampled at every stored time.
pub(crate) fn sampled_sub(problem: &ProblemSpec, traj: &Trajectory) -> Vec<Vec<f64>> {
    traj.times.iter().map(|&t| problem.sample(&problem.sub, t)).collect()
}

pub(crate) fn check_nonempty(traj: &Trajectory) -> Result<(), EstimateError> {
    if traj.is_empty() {
        Err(EstimateError::EmptyTrajectory)
    } else {
        Ok(())
    }
}

/// Largest spacing of the chart.
pub(crate) fn max_spacing(problem: &ProblemSpec) -> f64 {
    problem.geo.grid.spacing().iter().copied().fold(0.0, f64::max)
}
