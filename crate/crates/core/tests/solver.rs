mod common;

use hessflow::cli::config::ProblemFile;
use hessflow::operator::{linearize, PsiSpec, PsiTerm};
use hessflow::solver::linear::{bicgstab, gmres, solve};
use hessflow::solver::{solve_ibvp, SolverConfig};
use sprs::TriMat;

use common::{fixture, solved};

const MANUFACTURED: &str = r#"
schema = 1
name = "quadratic-manufactured"
horizon = 0.3

[grid]
lower = [-1.0, -1.0]
upper = [1.0, 1.0]
nodes = [13, 13]
topology = ["boundary", "boundary"]

[metric]
kind = "flat"

[operator]
kind = "sigma_k_root"
k = 2

[A]
kind = "zero"

[psi]
terms = [{ kind = "manufactured", exact = [
  { coeff = 0.5, powers = [2, 0] },
  { coeff = 0.5, powers = [0, 2] },
  { coeff = 1.0, t_power = 1 },
] }]

[phi]
terms = [
  { coeff = 0.5, powers = [2, 0] },
  { coeff = 0.5, powers = [0, 2] },
  { coeff = 1.0, t_power = 1 },
]

[exact]
terms = [
  { coeff = 0.5, powers = [2, 0] },
  { coeff = 0.5, powers = [0, 2] },
  { coeff = 1.0, t_power = 1 },
]

[subsolution]
terms = [
  { coeff = 0.5, powers = [2, 0] },
  { coeff = 0.5, powers = [0, 2] },
  { coeff = -1.0 },
  { coeff = 1.0, t_power = 1 },
]

[solver]
dt = 0.05
"#;

#[test]
fn manufactured_quadratic_is_reproduced() {
    let file = ProblemFile::parse(MANUFACTURED).unwrap();
    let (p, traj) = solved(&file, 1);
    let (t, u) = traj.last();
    assert!((t - 0.3).abs() < 1e-12);
    let exact = p.sample(p.exact.as_ref().unwrap(), t);
    let err = u.iter().zip(&exact).fold(0.0f64, |m, (a, b)| m.max((a - b).abs()));
    // second differences and backward Euler are exact on this solution
    assert!(err < 1e-9, "error {err:e}");
}

#[test]
fn trajectory_starts_at_initial_data_and_keeps_boundary_values() {
    let (p, traj) = solved(&fixture("ma_patch"), 1);
    assert_eq!(traj.times[0], 0.0);
    assert_eq!(traj.states[0], p.sample(&p.phi, 0.0));
    assert!(traj.times.windows(2).all(|w| w[1] > w[0]));
    assert_eq!(traj.diagnostics.len(), traj.len() - 1);
    for (t, u) in traj.times.iter().zip(&traj.states) {
        let phi = p.sample(&p.phi, *t);
        for node in p.boundary_nodes() {
            assert_eq!(u[node].to_bits(), phi[node].to_bits(), "node {node} at t = {t}");
        }
    }
}

#[test]
fn solves_are_deterministic() {
    let file = fixture("logp2_torus");
    let (_, a) = solved(&file, 1);
    let (_, b) = solved(&file, 1);
    assert_eq!(a.times, b.times);
    assert_eq!(a.states, b.states);
}

#[test]
fn time_periodic_source_stays_admissible() {
    let mut file = fixture("heat_torus");
    file.horizon = 6.0;
    file.solver.dt = 0.1;
    file.psi = PsiSpec::new(vec![
        PsiTerm::Const { value: 3.0 },
        PsiTerm::TimeSin { amp: 0.5, omega: 2.0, phase: 0.0 },
    ]);
    let (p, traj) = solved(&file, 1);
    assert_eq!(traj.len(), 61);
    assert!(traj.min_margin() > 0.1, "margin {}", traj.min_margin());
    for (t, u) in traj.times.iter().zip(&traj.states) {
        assert!(linearize(u, *t, &p).unwrap().min_margin() > 0.1);
    }
}

#[test]
fn inadmissible_initial_data_is_rejected() {
    let text = MANUFACTURED.replace("coeff = 0.5, powers", "coeff = -0.5, powers");
    let file = ProblemFile::parse(&text).unwrap();
    let err = file.problem(1).unwrap_err().to_string();
    assert!(err.contains("admissible"), "{err}");
}

#[test]
fn invalid_solver_settings_rejected() {
    let bad = SolverConfig { shrink: 1.5, ..SolverConfig::default() };
    assert!(bad.validate().is_err());
    let bad = SolverConfig { dt: 0.0, ..SolverConfig::default() };
    assert!(bad.validate().is_err());
    let p = fixture("ma_patch").problem(1).unwrap();
    assert!(solve_ibvp(&p, &SolverConfig { max_newton: 0, ..SolverConfig::default() }).is_err());
}

fn test_matrix(n: usize) -> sprs::CsMat<f64> {
    // nonsymmetric convection-diffusion stencil
    let mut t = TriMat::new((n, n));
    for i in 0..n {
        t.add_triplet(i, i, 4.0);
        if i > 0 {
            t.add_triplet(i, i - 1, -1.5);
        }
        if i + 1 < n {
            t.add_triplet(i, i + 1, -0.5);
        }
    }
    t.to_csr()
}

#[test]
fn krylov_solvers_agree() {
    let n = 200;
    let a = test_matrix(n);
    let x_true: Vec<f64> = (0..n).map(|i| (i as f64 * 0.1).sin()).collect();
    let mut b = vec![0.0; n];
    for (i, row) in a.outer_iterator().enumerate() {
        b[i] = row.iter().map(|(j, v)| v * x_true[j]).sum();
    }
    let (x1, s1) = bicgstab(&a, &b, 1e-12, 1000).unwrap();
    let (x2, s2) = gmres(&a, &b, 1e-12, 30, 1000);
    let (x3, _) = solve(&a, &b, 1e-12, 1000);
    for x in [&x1, &x2, &x3] {
        let err = x.iter().zip(&x_true).fold(0.0f64, |m, (p, q)| m.max((p - q).abs()));
        assert!(err < 1e-9, "error {err:e}");
    }
    assert!(s1.relative_residual <= 1e-12 && s2.relative_residual <= 1e-12);
}
