//! Acceptance suite: one line per criterion, nonzero exit if any fails.

mod common;

use std::f64::consts::PI;
use std::time::{Duration, Instant};

use hessflow::estimates::{barrier_gap, boundary_mr, ratio_report, tangential_identity_residual};
use hessflow::geometry::{commutation_residual, AxisTopology, ChartGeometry, ChartGrid, MetricKind};
use hessflow::operator::{jacobian_row, linearize, residual, verify_problem, OperatorError, TimeDerivative};
use hessflow::solver::mms::log_log_slope;
use hessflow::solver::{mms_convergence, solve_ibvp};
use hessflow::symfunc::{cone_contains, eval_f, grad_f, verify_structure, OperatorSpec};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use common::{fixture, solved, FIXTURES};

type Criterion = (&'static str, Option<u64>, fn() -> Verdict);

struct Verdict {
    pass: bool,
    detail: String,
}

fn verdict(pass: bool, detail: impl Into<String>) -> Verdict {
    Verdict { pass, detail: detail.into() }
}

fn within_budget(pass: bool, elapsed: Duration, budget_s: Option<u64>) -> bool {
    pass && budget_s.is_none_or(|b| elapsed.as_secs_f64() < b as f64)
}

fn structure_suite() -> Verdict {
    let specs = [
        OperatorSpec::sigma_k_root(1, 3).unwrap(),
        OperatorSpec::sigma_k_root(2, 3).unwrap(),
        OperatorSpec::sigma_k_root(2, 2).unwrap(),
        OperatorSpec::sigma_k_root(3, 3).unwrap(),
        OperatorSpec::sigma_quotient(2, 1, 3).unwrap(),
        OperatorSpec::log_pk(2, 3).unwrap(),
    ];
    let mut failures = Vec::new();
    for spec in &specs {
        let report = verify_structure(spec, 10_000, 2024);
        let mut ids = vec!["f1", "f2", "f5", "3I-45"];
        if spec.is_homogeneous() {
            ids.push("f4");
        }
        for id in ids {
            match report.record(id) {
                Some(r) if r.pass() && (id == "f5" || r.samples >= 10_000) => {}
                Some(r) => failures.push(format!("{} {id} margin {:e}", spec.label(), r.worst_margin)),
                None => failures.push(format!("{} {id} missing", spec.label())),
            }
        }
    }
    verdict(failures.is_empty(), format!("{} operators; failures: {failures:?}", specs.len()))
}

/// Interior cone point with pairwise eigenvalue gaps above `1e-3`.
fn cone_point(spec: &OperatorSpec, rng: &mut ChaCha8Rng) -> Vec<f64> {
    let cone = spec.cone();
    let n = cone.n;
    loop {
        let mut l: Vec<f64> = (0..n).map(|_| rng.random_range(-1.0..2.0)).collect();
        while !cone_contains(&cone, &l, 0.05) {
            l.iter_mut().for_each(|x| *x += 0.25);
        }
        let mut s = l.clone();
        s.sort_by(f64::total_cmp);
        if s.windows(2).all(|w| w[1] - w[0] > 1e-3) {
            return l;
        }
    }
}

fn fd_gradient(spec: &OperatorSpec, l: &[f64]) -> Vec<f64> {
    let scale = l.iter().fold(1.0f64, |m, x| m.max(x.abs()));
    let h = 1e-5 * scale;
    (0..l.len())
        .map(|i| {
            let mut a = l.to_vec();
            let mut b = l.to_vec();
            a[i] += h;
            b[i] -= h;
            (eval_f(spec, &a).unwrap() - eval_f(spec, &b).unwrap()) / (2.0 * h)
        })
        .collect()
}

fn jacobian_error(name: &str) -> Result<f64, OperatorError> {
    let mut file = fixture(name);
    let n = file.grid.nodes.len();
    file.grid.nodes = vec![8; n];
    let p = file.problem(1).unwrap();
    let (t, dt) = (0.05, 0.05);
    let previous = p.sample(&p.phi, 0.0);
    let base = p.sample(&p.phi, t);
    let u: Vec<f64> = (0..p.geo.len())
        .map(|node| {
            let x = p.geo.grid.coords(node);
            let wiggle: f64 = x.iter().enumerate().map(|(k, c)| ((k + 2) as f64 * c).sin()).sum();
            base[node] + 1e-3 * wiggle
        })
        .collect();
    let lin = linearize(&u, t, &p)?;
    let len = u.len();
    let mut j = vec![vec![0.0; len]; len];
    for (row, jr) in j.iter_mut().enumerate() {
        for (m, w) in jacobian_row(&lin, &p.geo, row) {
            jr[m] += w;
        }
        jr[row] -= 1.0 / dt;
    }
    let back = TimeDerivative::Backward { previous: &previous, dt };
    let eps = 1e-6;
    let mut err = 0.0f64;
    let mut scale = 0.0f64;
    for col in 0..len {
        let mut up = u.clone();
        let mut dn = u.clone();
        up[col] += eps;
        dn[col] -= eps;
        let ru = residual(&up, back, t, &p)?;
        let rd = residual(&dn, back, t, &p)?;
        for row in 0..len {
            let fd = (ru[row] - rd[row]) / (2.0 * eps);
            err = err.max((fd - j[row][col]).abs());
            scale = scale.max(j[row][col].abs());
        }
    }
    Ok(err / scale)
}

fn derivative_oracle() -> Verdict {
    let specs = [
        OperatorSpec::sigma_k_root(1, 3).unwrap(),
        OperatorSpec::sigma_k_root(2, 3).unwrap(),
        OperatorSpec::sigma_k_root(3, 3).unwrap(),
        OperatorSpec::sigma_quotient(2, 1, 3).unwrap(),
        OperatorSpec::log_pk(2, 3).unwrap(),
    ];
    let mut rng = ChaCha8Rng::seed_from_u64(99);
    let mut worst_grad = 0.0f64;
    for spec in &specs {
        for _ in 0..1000 {
            let l = cone_point(spec, &mut rng);
            let g = grad_f(spec, &l).unwrap();
            let fd = fd_gradient(spec, &l);
            let gmax = g.iter().fold(0.0f64, |m, x| m.max(x.abs()));
            let diff = g.iter().zip(&fd).fold(0.0f64, |m, (a, b)| m.max((a - b).abs()));
            worst_grad = worst_grad.max(diff / gmax);
        }
    }
    let mut worst_jac = 0.0f64;
    let mut failures = Vec::new();
    for name in FIXTURES {
        match jacobian_error(name) {
            Ok(e) => worst_jac = worst_jac.max(e),
            Err(e) => failures.push(format!("{name}: {e}")),
        }
    }
    verdict(
        worst_grad <= 1e-6 && worst_jac <= 1e-5 && failures.is_empty(),
        format!("grad_f rel err {worst_grad:.2e}; Jacobian rel err {worst_jac:.2e} on 8^n grids {failures:?}"),
    )
}

fn patch(n: usize, kind: MetricKind) -> ChartGeometry {
    let grid = ChartGrid::from_bounds(
        &[PI / 4.0, 0.0],
        &[PI / 4.0 + 1.0, 1.0],
        &[n, n],
        &[AxisTopology::Boundary, AxisTopology::Boundary],
    )
    .unwrap();
    ChartGeometry::new(grid, kind).unwrap()
}

/// Max of a nodal field over the nodes checked on the `coarse`-interval grid,
/// so every level is compared on the same physical points.
fn on_common_region(grid: &ChartGrid, per_node: &[f64], order: usize, coarse: usize) -> f64 {
    let factor = (grid.nodes()[0] - 1) / coarse;
    (0..grid.len())
        .filter(|&node| {
            grid.multi_index(node)
                .iter()
                .all(|&i| i % factor == 0 && (order..=coarse - order).contains(&(i / factor)))
        })
        .map(|node| per_node[node])
        .fold(0.0, f64::max)
}

fn geometry_identities() -> Verdict {
    let field = |g: &ChartGeometry| g.grid.sample(|x| x[0].sin() * (2.0 * x[1]).cos() + x[0] * x[0] * x[1]);
    let mut rates = Vec::new();
    let mut flat = 0.0f64;
    for order in [3, 4] {
        let mut errs = Vec::new();
        for n in [17, 33, 65] {
            let g = patch(n, MetricKind::SpherePatch { radius: 1.0 });
            let r = commutation_residual(&field(&g), &g.metric, &g.connection, &g.grid, order).unwrap();
            errs.push(on_common_region(&g.grid, &r.per_node, order, 16));
            let f = patch(n, MetricKind::Flat);
            let r = commutation_residual(&field(&f), &f.metric, &f.connection, &f.grid, order).unwrap();
            flat = flat.max(r.max);
        }
        for w in errs.windows(2) {
            rates.push((order, (w[0] / w[1]).log2()));
        }
    }
    let pass = rates.iter().all(|(_, r)| (r - 2.0).abs() <= 0.3) && flat <= 1e-10;
    let shown: Vec<String> = rates.iter().map(|(o, r)| format!("order {o}: {r:.3}")).collect();
    verdict(pass, format!("sphere rates [{}]; flat residual {flat:.2e}", shown.join(", ")))
}

fn manufactured() -> Verdict {
    let file = fixture("heat_torus");
    let family = |s| file.problem(s).map_err(|e| OperatorError::Validation(e.to_string()));
    let heat = match mms_convergence(family, &file.audit.mms, &file.solver) {
        Ok(r) => r,
        Err(e) => return verdict(false, format!("heat refinement failed: {e}")),
    };
    let spatial = heat.spatial_rate.unwrap_or(f64::NAN);
    let temporal = heat.temporal_rate.unwrap_or(f64::NAN);
    let ma = fixture("ma_patch");
    let p = ma.problem(4).unwrap();
    let (residual, newton) = match solve_ibvp(&p, &ma.solver) {
        Ok(t) => (t.max_residual(), t.max_newton_iterations()),
        Err(e) => return verdict(false, format!("MA solve failed: {e}")),
    };
    let pass = (1.7..=2.3).contains(&spatial) && (0.8..=1.2).contains(&temporal) && residual < 1e-9 && newton <= 5;
    verdict(
        pass,
        format!(
            "heat spatial {spatial:.3}, temporal {temporal:.3}; MA {:?} residual {residual:.2e}, max Newton {newton}",
            p.geo.grid.nodes()
        ),
    )
}

fn ma_barrier() -> Verdict {
    let (p, traj) = solved(&fixture("ma_patch"), 1);
    match barrier_gap(&p, &traj) {
        Ok(a) => verdict(
            (a.delta0 - 0.5).abs() <= 1e-10 && a.min_gap >= -1e-8 && a.theta > 0.0,
            format!("delta0 {:.12}, theta {:.4}, min gap {:.2e} over {} samples", a.delta0, a.theta, a.min_gap, a.samples),
        ),
        Err(e) => verdict(false, e.to_string()),
    }
}

fn admissibility() -> Verdict {
    let mut worst = f64::INFINITY;
    let mut failures = Vec::new();
    for name in FIXTURES {
        let file = fixture(name);
        let (p, traj) = solved(&file, 1);
        worst = worst.min(traj.min_margin());
        for (t, u) in traj.times.iter().zip(&traj.states) {
            match linearize(u, *t, &p) {
                Ok(l) => worst = worst.min(l.min_margin()),
                Err(e) => failures.push(format!("{name} t={t}: {e}")),
            }
        }
    }
    verdict(
        worst >= 1e-8 && failures.is_empty(),
        format!("min margin {worst:.3e} over states and Newton iterates {failures:?}"),
    )
}

fn boundary_machinery() -> Verdict {
    let file = fixture("disk_annulus");
    let mut hs = Vec::new();
    let mut res = Vec::new();
    let mut base = None;
    for s in [1, 2, 4] {
        let (p, traj) = solved(&file, s);
        match tangential_identity_residual(&p, &traj) {
            Ok(r) => {
                hs.push(r.h);
                res.push(r.max);
            }
            Err(e) => return verdict(false, format!("tangential identity: {e}")),
        }
        if s == 1 {
            base = Some((p, traj));
        }
    }
    let rate = log_log_slope(&hs, &res);
    let (p, traj) = base.unwrap();
    let audit = match boundary_mr(&p, &traj, &file.audit.r_ladder) {
        Ok(a) => a,
        Err(e) => return verdict(false, e.to_string()),
    };
    let last = audit.largest_valid().and_then(|r| r.m_r);
    let nu0 = verify_problem(&p, file.audit.samples, file.audit.seed).record("lbd0").map(|r| r.worst_margin);
    let pass = (rate - 2.0).abs() <= 0.3 && audit.monotone && last.is_some_and(|m| m > 0.0) && nu0.is_some_and(|v| v > 0.0);
    verdict(
        pass,
        format!("tangential rate {rate:.3}; m_R monotone {}, largest-R m_R {last:?}; nu0 {nu0:?}", audit.monotone),
    )
}

fn ratio_stability() -> Verdict {
    let mut parts = Vec::new();
    let mut pass = true;
    for name in ["heat_torus", "ma_patch"] {
        let file = fixture(name);
        let runs: Vec<_> = file.audit.refinement.iter().map(|&s| solved(&file, s)).collect();
        let refs: Vec<_> = runs.iter().map(|(p, t)| (p, t)).collect();
        let r = ratio_report(&refs).unwrap();
        let ok = r.drift_within(0.10) == Some(true);
        pass &= ok;
        parts.push(format!("{name} c2 drift {:?} c1 drift {:?}", r.c2_drift, r.c1_drift));
    }
    verdict(pass, parts.join("; "))
}

fn main() {
    let criteria: [Criterion; 8] = [
        ("structure conditions", Some(30), structure_suite),
        ("derivative oracle", Some(60), derivative_oracle),
        ("geometry identities", Some(60), geometry_identities),
        ("manufactured solutions", Some(180), manufactured),
        ("barrier inequality on MA", Some(60), ma_barrier),
        ("admissibility invariant", None, admissibility),
        ("boundary machinery", None, boundary_machinery),
        ("estimate-ratio stability", None, ratio_stability),
    ];
    let mut failed = 0;
    for (i, (name, budget, run)) in criteria.iter().enumerate() {
        let start = Instant::now();
        let v = run();
        let elapsed = start.elapsed();
        let pass = within_budget(v.pass, elapsed, *budget);
        if !pass {
            failed += 1;
        }
        println!(
            "criterion {}: {} {name} ({:.1}s) {}",
            i + 1,
            if pass { "PASS" } else { "FAIL" },
            elapsed.as_secs_f64(),
            v.detail
        );
    }
    println!("acceptance: {} of {} criteria passed", criteria.len() - failed, criteria.len());
    if failed > 0 {
        std::process::exit(1);
    }
}
