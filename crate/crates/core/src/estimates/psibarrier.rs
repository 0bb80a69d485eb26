//! Grid search for the boundary barrier
//! `Ψ = A₁v + A₂ρ² − A₃ Σ_{l<n} |∇_l(u − φ)|²` near a boundary point.

use serde::{Deserialize, Serialize};

use super::{check_nonempty, max_spacing, sampled_sub, EstimateError};
use crate::geometry::{boundary_frame, chart_distance};
use crate::operator::{linearize, LinearizedState, ProblemSpec};
use crate::solver::Trajectory;

/// Slack allowed in both sign conditions.
pub const SIGN_TOL: f64 = 1e-9;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PsiGrid {
    pub a1: Vec<f64>,
    pub a2: Vec<f64>,
    pub a3: Vec<f64>,
    /// Neighbourhood radii in units of the largest grid spacing.
    pub radii: Vec<f64>,
}

impl Default for PsiGrid {
    fn default() -> Self {
        Self {
            a1: vec![1.0, 10.0, 100.0, 1000.0],
            a2: vec![0.0, 1.0, 10.0, 100.0],
            a3: vec![0.0, 0.1, 1.0],
            radii: vec![8.0],
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct PsiCoefficients {
    pub a1: f64,
    pub a2: f64,
    pub a3: f64,
    pub delta: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct PsiBarrierResult {
    pub x0: usize,
    pub t0: f64,
    /// First feasible coefficients in search order, if any.
    pub found: Option<PsiCoefficients>,
    /// `max 𝓛(Ψ ± ∇_α(u − φ))` over `M_δ` at the reported coefficients.
    pub max_l: Option<f64>,
    /// `min (Ψ ± ∇_α(u − φ))` over the parabolic boundary of `M_δ`.
    pub min_boundary: Option<f64>,
    pub tried: usize,
    pub interior_samples: usize,
    pub boundary_samples: usize,
    pub note: String,
}

/// Per-sample values of the four building blocks of `Ψ ± ∇_α(u − φ)`.
#[derive(Clone, Copy)]
struct Parts {
    v: f64,
    rho2: f64,
    tang: f64,
    /// One entry per tangential direction.
    d: [f64; 4],
}

struct Sample {
    rho: f64,
    t: f64,
    bottom: bool,
    lateral: bool,
    parts: Parts,
}

fn combine(p: &Parts, c: &PsiCoefficients, alpha: usize, sign: f64) -> f64 {
    c.a1 * p.v + c.a2 * p.rho2 - c.a3 * p.tang + sign * p.d[alpha]
}

fn apply_all(lin: &LinearizedState, problem: &ProblemSpec, f: &[Vec<f64>], f_prev: &[Vec<f64>], dt: f64, node: usize) -> Vec<f64> {
    f.iter()
        .zip(f_prev)
        .map(|(w, wp)| lin.apply_at(&problem.geo, w, (w[node] - wp[node]) / dt, node))
        .collect()
}

/// Searches `(A₁, A₂, A₃, δ)` in lexicographic order of the grid, with `δ`
/// outermost. `M_δ = {ρ < δ, 0 < t ≤ t₀ + δ}` in the interior; its parabolic
/// boundary is the bottom slice, the boundary nodes within `ρ < δ` and the
/// shell `δ ≤ ρ < δ + h`.
pub fn psi_barrier_search(
    problem: &ProblemSpec,
    traj: &Trajectory,
    x0: usize,
    t0: f64,
    grid: &PsiGrid,
) -> Result<PsiBarrierResult, EstimateError> {
    check_nonempty(traj)?;
    let geo = &problem.geo;
    if !geo.grid.has_boundary() {
        return Err(EstimateError::NoBoundary);
    }
    let n = geo.dim();
    if n - 1 > 4 {
        return Err(EstimateError::Precondition("barrier search supports n <= 5".into()));
    }
    let frame = boundary_frame(&geo.metric, &geo.connection, &geo.grid)?;
    let entry = frame
        .entries
        .iter()
        .find(|e| e.node == x0)
        .ok_or_else(|| EstimateError::Precondition(format!("node {x0} is not a boundary node")))?;
    let h = max_spacing(problem);
    let deltas: Vec<f64> = grid.radii.iter().map(|r| r * h).collect();
    let reach = deltas.iter().copied().fold(0.0, f64::max);
    let rho: Vec<f64> = (0..geo.len()).map(|x| chart_distance(&geo.metric, &geo.grid, x0, x)).collect();
    let rho2: Vec<f64> = rho.iter().map(|r| r * r).collect();
    let subs = sampled_sub(problem, traj);

    // Building-block fields at every stored time.
    let fields: Vec<Vec<Vec<f64>>> = traj
        .states
        .iter()
        .enumerate()
        .map(|(m, u)| {
            let t = traj.times[m];
            let w: Vec<f64> = u.iter().zip(problem.sample(&problem.phi, t)).map(|(a, b)| a - b).collect();
            let partials: Vec<Vec<f64>> = (0..n).map(|a| geo.grid.derivative(&w, a)).collect();
            let dirs: Vec<Vec<f64>> = (0..n - 1)
                .map(|l| (0..geo.len()).map(|x| (0..n).map(|i| entry.frame[(i, l)] * partials[i][x]).sum()).collect())
                .collect();
            let tang: Vec<f64> = (0..geo.len()).map(|x| dirs.iter().map(|d| d[x] * d[x]).sum()).collect();
            let v: Vec<f64> = u.iter().zip(&subs[m]).map(|(a, b)| a - b).collect();
            let mut out = vec![v, rho2.clone(), tang];
            out.extend(dirs);
            out
        })
        .collect();
    let parts_at = |f: &[Vec<f64>], x: usize| {
        let mut d = [0.0; 4];
        for l in 0..n - 1 {
            d[l] = f[3 + l][x];
        }
        Parts { v: f[0][x], rho2: f[1][x], tang: f[2][x], d }
    };

    let t_cap = t0 + reach;
    let near: Vec<usize> = (0..geo.len()).filter(|&x| rho[x] < reach + h).collect();
    let mut interior: Vec<Sample> = Vec::new();
    let mut edge: Vec<Sample> = Vec::new();
    for m in 0..traj.len() {
        let t = traj.times[m];
        if t > t_cap + 1e-12 {
            break;
        }
        let lin = if m > 0 { Some(linearize(&traj.states[m], t, problem)?) } else { None };
        for &x in &near {
            let base = Sample {
                rho: rho[x],
                t,
                bottom: m == 0,
                lateral: geo.grid.is_boundary(x),
                parts: parts_at(&fields[m], x),
            };
            if let (Some(lin), false) = (&lin, base.lateral) {
                let l = apply_all(lin, problem, &fields[m], &fields[m - 1], t - traj.times[m - 1], x);
                let mut d = [0.0; 4];
                d[..n - 1].copy_from_slice(&l[3..3 + n - 1]);
                interior.push(Sample {
                    parts: Parts { v: l[0], rho2: l[1], tang: l[2], d },
                    ..base
                });
            }
            edge.push(base);
        }
    }

    let mut tried = 0;
    let mut best = None;
    'search: for &delta in &deltas {
        let window = |s: &&Sample| s.t <= t0 + delta + 1e-12;
        let in_set: Vec<&Parts> = interior.iter().filter(window).filter(|s| s.rho < delta).map(|s| &s.parts).collect();
        let on_edge: Vec<&Parts> = edge
            .iter()
            .filter(window)
            .filter(|s| if s.bottom || s.lateral { s.rho < delta } else { s.rho >= delta && s.rho < delta + h })
            .map(|s| &s.parts)
            .collect();
        for &a1 in &grid.a1 {
            for &a2 in &grid.a2 {
                for &a3 in &grid.a3 {
                    tried += 1;
                    let c = PsiCoefficients { a1, a2, a3, delta };
                    let mut max_l = f64::NEG_INFINITY;
                    let mut min_b = f64::INFINITY;
                    for alpha in 0..n - 1 {
                        for sign in [1.0, -1.0] {
                            for p in &in_set {
                                max_l = max_l.max(combine(p, &c, alpha, sign));
                            }
                            for p in &on_edge {
                                min_b = min_b.min(combine(p, &c, alpha, sign));
                            }
                        }
                    }
                    if max_l <= SIGN_TOL && min_b >= -SIGN_TOL {
                        best = Some((c, max_l, min_b, in_set.len(), on_edge.len()));
                        break 'search;
                    }
                }
            }
        }
    }
    Ok(match best {
        Some((c, max_l, min_b, ni, nb)) => PsiBarrierResult {
            x0,
            t0,
            found: Some(c),
            max_l: Some(max_l),
            min_boundary: Some(min_b),
            tried,
            interior_samples: ni,
            boundary_samples: nb,
            note: "feasible coefficients found".into(),
        },
        None => PsiBarrierResult {
            x0,
            t0,
            found: None,
            max_l: None,
            min_boundary: None,
            tried,
            interior_samples: interior.len(),
            boundary_samples: edge.len(),
            note: "not found in grid".into(),
        },
    })
}
