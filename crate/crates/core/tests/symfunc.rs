use hessflow::symfunc::{cone_contains, eval_f, grad_f, sigma_k, verify_structure, OperatorSpec};
use proptest::prelude::*;

fn specs() -> Vec<OperatorSpec> {
    vec![
        OperatorSpec::sigma_k_root(1, 3).unwrap(),
        OperatorSpec::sigma_k_root(2, 3).unwrap(),
        OperatorSpec::sigma_k_root(3, 3).unwrap(),
        OperatorSpec::sigma_quotient(3, 1, 3).unwrap(),
        OperatorSpec::log_pk(2, 3).unwrap(),
    ]
}

/// Shifts `l` along the diagonal until it is inside the cone with margin.
fn into_cone(spec: &OperatorSpec, mut l: Vec<f64>) -> Vec<f64> {
    while !cone_contains(&spec.cone(), &l, 0.05) {
        l.iter_mut().for_each(|x| *x += 0.25);
    }
    l
}

#[test]
fn elementary_symmetric_values() {
    let l = [1.0, 2.0, 3.0];
    assert_eq!(sigma_k(&l, 1).unwrap(), 6.0);
    assert_eq!(sigma_k(&l, 2).unwrap(), 11.0);
    assert_eq!(sigma_k(&l, 3).unwrap(), 6.0);
    assert!(sigma_k(&l, 4).is_err());
}

#[test]
fn shipped_operators_pass_structure_checks() {
    for spec in specs() {
        let r = verify_structure(&spec, 500, 5);
        assert!(r.passed(), "{}: {r:#?}", spec.label());
    }
}

#[test]
fn structure_checks_are_seed_deterministic() {
    let spec = OperatorSpec::sigma_quotient(2, 1, 3).unwrap();
    let a = verify_structure(&spec, 300, 8);
    let b = verify_structure(&spec, 300, 8);
    let margins = |r: &hessflow::symfunc::StructureReport| r.records.iter().map(|c| c.worst_margin).collect::<Vec<_>>();
    assert_eq!(margins(&a), margins(&b));
}

proptest! {
    #[test]
    fn derivatives_positive(raw in prop::collection::vec(-1.0f64..2.0, 3), which in 0usize..5) {
        let spec = &specs()[which];
        let l = into_cone(spec, raw);
        prop_assert!(grad_f(spec, &l).unwrap().iter().all(|&g| g > 0.0));
    }

    #[test]
    fn midpoint_concavity(a in prop::collection::vec(-1.0f64..2.0, 3), b in prop::collection::vec(-1.0f64..2.0, 3), which in 0usize..5) {
        let spec = &specs()[which];
        let (a, b) = (into_cone(spec, a), into_cone(spec, b));
        let m: Vec<f64> = a.iter().zip(&b).map(|(x, y)| 0.5 * (x + y)).collect();
        let lhs = eval_f(spec, &m).unwrap();
        let rhs = 0.5 * (eval_f(spec, &a).unwrap() + eval_f(spec, &b).unwrap());
        prop_assert!(lhs >= rhs - 1e-10, "{lhs} < {rhs}");
    }

    #[test]
    fn degree_one_homogeneity(raw in prop::collection::vec(-1.0f64..2.0, 3), c in 0.1f64..10.0, which in 0usize..4) {
        let spec = &specs()[which];
        let l = into_cone(spec, raw);
        let scaled: Vec<f64> = l.iter().map(|x| c * x).collect();
        let f = eval_f(spec, &l).unwrap();
        prop_assert!((eval_f(spec, &scaled).unwrap() - c * f).abs() <= 1e-12 * (c * f).abs().max(1.0));
        // Euler: Σ f_i λ_i = f
        let euler: f64 = grad_f(spec, &l).unwrap().iter().zip(&l).map(|(g, x)| g * x).sum();
        prop_assert!((euler - f).abs() <= 1e-10 * f.abs().max(1.0));
    }

    #[test]
    fn symmetric_in_entries(raw in prop::collection::vec(-1.0f64..2.0, 3), which in 0usize..5) {
        let spec = &specs()[which];
        let l = into_cone(spec, raw);
        let p = vec![l[2], l[0], l[1]];
        prop_assert!((eval_f(spec, &l).unwrap() - eval_f(spec, &p).unwrap()).abs() <= 1e-12);
    }

    #[test]
    fn euler_sum_nonnegative(raw in prop::collection::vec(-1.0f64..2.0, 3), which in 0usize..5) {
        let spec = &specs()[which];
        let l = into_cone(spec, raw);
        let s: f64 = grad_f(spec, &l).unwrap().iter().zip(&l).map(|(g, x)| g * x).sum();
        prop_assert!(s >= -1e-12);
    }
}
