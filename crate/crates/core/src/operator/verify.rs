//! Sampled audit of the problem-structure hypotheses.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::{NodeCtx, ProblemSpec};
use crate::report::{AuditReport, Comparison, ConditionRecord, ConditionStatus};
use crate::symfunc::verify_structure;

/// Times per unit horizon used for the nodewise scans.
const TIME_SAMPLES: usize = 16;
/// `|p|` ladder for the growth fits: `10^{1 + 3j/12}`, `j = 0..=12`.
const LADDER_STEPS: usize = 12;
/// Samples per ladder rung in the growth fits.
const ENVELOPE_SAMPLES: usize = 48;
/// Allowed excess of a fitted exponent over the declared one.
pub const EXPONENT_TOL: f64 = 0.05;
/// Tolerance on the `t = 0` residual of `φ`.
pub const COMP_TOL: f64 = 1e-8;

struct Sampler<'a> {
    problem: &'a ProblemSpec,
    rng: ChaCha8Rng,
}

impl<'a> Sampler<'a> {
    fn node(&mut self) -> usize {
        self.rng.random_range(0..self.problem.geo.len())
    }

    fn boundary_node(&mut self, nodes: &[usize]) -> usize {
        nodes[self.rng.random_range(0..nodes.len())]
    }

    fn time(&mut self) -> f64 {
        self.rng.random_range(0.0..=self.problem.horizon)
    }

    fn z(&mut self) -> f64 {
        let b = self.problem.sample_box;
        if b.z_max > b.z_min {
            self.rng.random_range(b.z_min..=b.z_max)
        } else {
            b.z_min
        }
    }

    fn raw(&mut self) -> Vec<f64> {
        loop {
            let v: Vec<f64> = (0..self.problem.dim()).map(|_| self.rng.random_range(-1.0..1.0)).collect();
            if v.iter().map(|a| a * a).sum::<f64>() > 1e-4 {
                return v;
            }
        }
    }

    /// Covector of `g`-norm `s`.
    fn covector(&mut self, ctx: &NodeCtx, s: f64) -> Vec<f64> {
        let v = self.raw();
        let nrm = ctx.covector_norm2(&v).sqrt();
        v.iter().map(|a| a * s / nrm).collect()
    }

    /// Covector with `|p|_g` uniform in the declared box.
    fn p(&mut self, ctx: &NodeCtx) -> Vec<f64> {
        let s = self.rng.random_range(0.0..=self.problem.sample_box.p_max);
        self.covector(ctx, s)
    }

    /// Unit vector.
    fn xi(&mut self, ctx: &NodeCtx) -> Vec<f64> {
        let v = self.raw();
        let nrm = ctx.vector_norm2(&v).sqrt();
        v.iter().map(|a| a / nrm).collect()
    }

    /// Pair of `g`-orthonormal vectors.
    fn orthonormal_pair(&mut self, ctx: &NodeCtx) -> (Vec<f64>, Vec<f64>) {
        let xi = self.xi(ctx);
        loop {
            let mut eta = self.raw();
            let proj = ctx.geo.metric.inner(ctx.node, &xi, &eta);
            for (e, x) in eta.iter_mut().zip(&xi) {
                *e -= proj * x;
            }
            let nrm = ctx.vector_norm2(&eta).sqrt();
            if nrm > 1e-3 {
                return (xi, eta.iter().map(|a| a / nrm).collect());
            }
        }
    }
}

fn not_applicable(id: &str, note: &str) -> ConditionRecord {
    ConditionRecord {
        status: ConditionStatus::NotApplicable,
        ..ConditionRecord::informational(id, 0, f64::NAN, note)
    }
}

/// Least-squares slope of `ln(1 + max(Q, 0))` against `ln s`.
fn fitted_exponent(ladder: &[f64], q: &[f64]) -> f64 {
    let xs: Vec<f64> = ladder.iter().map(|s| s.ln()).collect();
    let ys: Vec<f64> = q.iter().map(|v| (1.0 + v.max(0.0)).ln()).collect();
    let n = xs.len() as f64;
    let mx = xs.iter().sum::<f64>() / n;
    let my = ys.iter().sum::<f64>() / n;
    let sxy: f64 = xs.iter().zip(&ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    let sxx: f64 = xs.iter().map(|x| (x - mx) * (x - mx)).sum();
    sxy / sxx
}

fn p_ladder() -> Vec<f64> {
    (0..=LADDER_STEPS)
        .map(|j| 10f64.powf(1.0 + 3.0 * j as f64 / LADDER_STEPS as f64))
        .collect()
}

struct Envelope {
    exponent: f64,
    /// `max_s Q(s) / (1 + s^γ)` with `γ` the declared or fitted exponent.
    constant: f64,
}

/// Sup envelope of `q(ctx, z, p, ξ, η)` over the `|p|` ladder.
fn envelope(
    sampler: &mut Sampler,
    declared: Option<f64>,
    q: impl Fn(&NodeCtx, f64, &[f64], &[f64], &[f64]) -> f64,
) -> Envelope {
    let problem = sampler.problem;
    let draws: Vec<(usize, f64, f64, Vec<f64>, Vec<f64>, Vec<f64>)> = (0..ENVELOPE_SAMPLES)
        .map(|_| {
            let node = sampler.node();
            let t = sampler.time();
            let ctx = problem.ctx(node, t);
            let dir = sampler.covector(&ctx, 1.0);
            let (xi, eta) = sampler.orthonormal_pair(&ctx);
            (node, t, sampler.z(), dir, xi, eta)
        })
        .collect();
    let ladder = p_ladder();
    let qs: Vec<f64> = ladder
        .iter()
        .map(|&s| {
            draws
                .iter()
                .map(|(node, t, z, dir, xi, eta)| {
                    let ctx = problem.ctx(*node, *t);
                    let p: Vec<f64> = dir.iter().map(|a| a * s).collect();
                    q(&ctx, *z, &p, xi, eta)
                })
                .fold(f64::NEG_INFINITY, f64::max)
        })
        .collect();
    let exponent = fitted_exponent(&ladder, &qs);
    let gamma = declared.unwrap_or(exponent);
    let constant = ladder
        .iter()
        .zip(&qs)
        .map(|(s, v)| v.max(0.0) / (1.0 + s.powf(gamma)))
        .fold(0.0, f64::max);
    Envelope { exponent, constant }
}

fn growth_record(id: &str, what: &str, declared: Option<f64>, env: Envelope) -> ConditionRecord {
    let samples = ENVELOPE_SAMPLES * (LADDER_STEPS + 1);
    match declared {
        Some(g) => ConditionRecord::checked(
            id,
            samples,
            g - env.exponent,
            Comparison::AtLeast(-EXPONENT_TOL),
            &format!(
                "{what}: fitted exponent {:.4} vs declared {g}, envelope constant {:.4e}",
                env.exponent, env.constant
            ),
        ),
        None => ConditionRecord::informational(
            id,
            samples,
            env.exponent,
            &format!(
                "{what}: fitted exponent {:.4}, envelope constant {:.4e} (no exponent declared)",
                env.exponent, env.constant
            ),
        ),
    }
}

/// Audits A2, A4, the subsolution slack, compatibility, boundary positivity,
/// the growth conditions and A3 by deterministic sampling.
pub fn verify_problem(problem: &ProblemSpec, samples: usize, seed: u64) -> AuditReport {
    let samples = samples.max(1);
    let mut report = AuditReport::new(format!("problem audit: {}", problem.name));
    report.notes.push(
        "A is evaluated as A(x, t, p) everywhere, including where a test-function argument would write A(x, u, p)"
            .into(),
    );
    report.notes.push(format!(
        "unbounded (z, p) quantifiers sampled over z in [{}, {}], |p|_g <= {}; growth envelopes over |p| in [10, 1e4]",
        problem.sample_box.z_min, problem.sample_box.z_max, problem.sample_box.p_max
    ));
    let mut s = Sampler {
        problem,
        rng: ChaCha8Rng::seed_from_u64(seed),
    };
    let boundary = problem.boundary_nodes();

    // A2 for ψ: −ψ concave in p.
    let mut worst = f64::INFINITY;
    for _ in 0..samples {
        let ctx = problem.ctx(s.node(), s.time());
        let z = s.z();
        let (p1, p2) = (s.p(&ctx), s.p(&ctx));
        let mid: Vec<f64> = p1.iter().zip(&p2).map(|(a, b)| 0.5 * (a + b)).collect();
        let (v1, v2, vm) = (problem.psi.value(&ctx, z, &p1), problem.psi.value(&ctx, z, &p2), problem.psi.value(&ctx, z, &mid));
        worst = worst.min((0.5 * (v1 + v2) - vm) / (1.0 + v1.abs() + v2.abs()));
    }
    report.records.push(ConditionRecord::checked(
        "A2_psi",
        samples,
        worst,
        Comparison::AtLeast(-1e-10),
        "midpoint concavity of -psi in p, relative to 1 + |psi|",
    ));

    // A2 for A: A^{ξξ} concave in p.
    let mut worst = f64::INFINITY;
    for _ in 0..samples {
        let ctx = problem.ctx(s.node(), s.time());
        let xi = s.xi(&ctx);
        let (p1, p2) = (s.p(&ctx), s.p(&ctx));
        let mid: Vec<f64> = p1.iter().zip(&p2).map(|(a, b)| 0.5 * (a + b)).collect();
        let a1 = problem.a.bilinear(&ctx, &p1, &xi, &xi);
        let a2 = problem.a.bilinear(&ctx, &p2, &xi, &xi);
        let am = problem.a.bilinear(&ctx, &mid, &xi, &xi);
        worst = worst.min((am - 0.5 * (a1 + a2)) / (1.0 + a1.abs() + a2.abs()));
    }
    report.records.push(ConditionRecord::checked(
        "A2_A",
        samples,
        worst,
        Comparison::AtLeast(-1e-10),
        "midpoint concavity of A(xi, xi) in p for unit xi, relative to 1 + |A|",
    ));

    // A4: ψ_z ≤ 0.
    let mut worst = f64::INFINITY;
    for _ in 0..samples {
        let ctx = problem.ctx(s.node(), s.time());
        let z = s.z();
        let p = s.p(&ctx);
        worst = worst.min(-problem.psi.d_z(&ctx, z, &p));
    }
    report.records.push(ConditionRecord::checked(
        "A4",
        samples,
        worst,
        Comparison::AtLeast(0.0),
        "margin is min of -psi_z",
    ));

    // Initial admissibility of φ.
    let (node, margin) = problem.min_analytic_margin(&problem.phi, 0.0);
    report.records.push(ConditionRecord::checked(
        "phi_admissible",
        problem.geo.len(),
        margin,
        Comparison::AtLeast(super::MASK_MARGIN),
        &format!("min cone margin of phi(., 0), attained at node {node}"),
    ));

    let times = problem.time_ladder(TIME_SAMPLES);

    // Subsolution slack δ₀.
    let (delta0, arg_node, arg_t) = problem.sub_slack(&times);
    report.records.push(ConditionRecord::checked(
        "sub",
        problem.geo.len() * times.len(),
        delta0,
        Comparison::Positive,
        &format!(
            "empirical delta_0 = min of F[sub] - sub_t - psi[sub] over the grid and {} times, at node {} t = {}",
            times.len(),
            arg_node,
            arg_t
        ),
    ));

    // u̲ ≤ φ at t = 0.
    let phi0 = problem.sample(&problem.phi, 0.0);
    let sub0 = problem.sample(&problem.sub, 0.0);
    let gap = phi0.iter().zip(&sub0).map(|(p, u)| p - u).fold(f64::INFINITY, f64::min);
    report.records.push(ConditionRecord::checked(
        "sub_initial",
        phi0.len(),
        gap,
        Comparison::AtLeast(-1e-12),
        "min of phi - sub at t = 0",
    ));

    // u̲ = φ on the lateral boundary.
    if boundary.is_empty() {
        report.records.push(not_applicable("sub_boundary", "chart has no boundary"));
    } else {
        let mut dev = 0.0f64;
        for &t in &times {
            for &node in &boundary {
                let x = problem.geo.grid.coords(node);
                dev = dev.max((problem.sub.value(&x, t) - problem.phi.value(&x, t)).abs());
            }
        }
        let note = "max |sub - phi| on the lateral boundary";
        report.records.push(if problem.sub_matches_boundary {
            ConditionRecord::checked("sub_boundary", boundary.len() * times.len(), -dev, Comparison::AtLeast(-1e-12), note)
        } else {
            ConditionRecord::informational("sub_boundary", boundary.len() * times.len(), dev, note)
        });
    }

    // Compatibility: φ solves the equation at t = 0 on the boundary.
    let comp_nodes: Vec<usize> = if boundary.is_empty() {
        (0..problem.geo.len()).collect()
    } else {
        boundary.clone()
    };
    let comp = comp_nodes
        .iter()
        .map(|&n| {
            let r = problem.analytic_residual(&problem.phi, n, 0.0);
            if r.is_nan() { f64::INFINITY } else { r.abs() }
        })
        .fold(0.0, f64::max);
    if boundary.is_empty() {
        report.records.push(ConditionRecord::informational(
            "comp",
            comp_nodes.len(),
            comp,
            "no lateral boundary; max |t = 0 residual of phi| over all nodes",
        ));
    } else {
        report.records.push(ConditionRecord::checked(
            "comp",
            comp_nodes.len(),
            -comp,
            Comparison::AtLeast(-COMP_TOL),
            "margin is -max |t = 0 residual of phi| on the boundary",
        ));
    }

    // Boundary positivity ν₀ = inf φ_t + ψ over SM_T × box.
    if boundary.is_empty() {
        report.records.push(not_applicable("lbd0", "chart has no boundary"));
    } else {
        let mut nu0 = f64::INFINITY;
        for _ in 0..samples {
            let node = s.boundary_node(&boundary);
            let t = s.time();
            let ctx = problem.ctx(node, t);
            let z = s.z();
            let p = s.p(&ctx);
            let phit = problem.phi.jet(&ctx.x, t).dt;
            nu0 = nu0.min(phit + problem.psi.value(&ctx, z, &p));
        }
        report.records.push(ConditionRecord::checked(
            "lbd0",
            samples,
            nu0,
            Comparison::Positive,
            "nu_0 = min of phi_t + psi over sampled boundary points and the declared (z, p) box",
        ));
    }

    // Growth conditions.
    let g = problem.growth;
    let env = envelope(&mut s, g.gamma1, |ctx, _, p, xi, _| problem.a.p_dot_dx(ctx, p, xi));
    report.records.push(growth_record("5.1a", "p . D_x A(xi, xi)", g.gamma1, env));
    let env = envelope(&mut s, g.gamma2, |ctx, z, p, _, _| {
        -(problem.psi.p_dot_dx(ctx, z, p) + ctx.covector_norm2(p) * problem.psi.d_z(ctx, z, p))
    });
    report.records.push(growth_record("5.1b", "-(p . D_x psi + |p|^2 psi_z)", g.gamma2, env));
    let env = envelope(&mut s, g.gamma, |ctx, z, p, _, _| {
        problem.psi.d_p(ctx, z, p).iter().zip(p).map(|(a, b)| a * b).sum()
    });
    report.records.push(growth_record("p-A5_psi", "p . D_p psi", g.gamma, env));
    let env = envelope(&mut s, g.gamma, |ctx, _, p, xi, _| {
        let dp = problem.a.d_p(ctx, p);
        let mut v = 0.0;
        for (k, m) in dp.iter().enumerate() {
            for i in 0..p.len() {
                for j in 0..p.len() {
                    v += p[k] * m[(i, j)] * xi[i] * xi[j];
                }
            }
        }
        -v
    });
    report.records.push(growth_record("p-A5_A", "-p . D_p A(xi, xi)", g.gamma, env));
    let env = envelope(&mut s, g.gamma, |ctx, z, p, _, _| -problem.psi.value(ctx, z, p));
    report.records.push(growth_record("p-A500", "-psi", g.gamma, env));
    let env = envelope(&mut s, g.gamma, |ctx, _, p, xi, eta| problem.a.bilinear(ctx, p, xi, eta).abs());
    report.records.push(growth_record("p-G20**", "|A(xi, eta)| for orthonormal xi, eta", g.gamma, env));

    // A3: A_pp(ξ, ξ)ηη ≤ −c₀|ξ|²|η|² + c₀ g(ξ,η)².
    let mut worst = f64::INFINITY;
    let mut best_c0 = f64::INFINITY;
    for _ in 0..samples {
        let ctx = problem.ctx(s.node(), s.time());
        let xi = s.xi(&ctx);
        let eta = s.covector(&ctx, 1.0);
        let q = problem.a.pp_quad(&ctx, &xi, &eta);
        let c2 = xi.iter().zip(&eta).map(|(a, b)| a * b).sum::<f64>().powi(2);
        if let Some(c0) = g.c0 {
            worst = worst.min(-c0 * (1.0 - c2) - q);
        }
        if 1.0 - c2 > 1e-6 {
            best_c0 = best_c0.min(-q / (1.0 - c2));
        }
    }
    report.records.push(match g.c0 {
        Some(c0) => ConditionRecord::checked(
            "A3",
            samples,
            worst,
            Comparison::AtLeast(-1e-10),
            &format!("declared c_0 = {c0}; largest consistent c_0 on samples {best_c0:.6e}"),
        ),
        None => ConditionRecord::informational(
            "A3",
            samples,
            best_c0,
            "largest c_0 consistent with the samples (no c_0 declared)",
        ),
    });

    if let Some(r) = verify_structure(&problem.op, 16, seed).record("gj-I105") {
        report.records.push(r.clone());
    }
    report
}
