//! Jacobi-preconditioned Krylov solvers for the Newton systems.

use serde::Serialize;
use sprs::CsMat;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum KrylovMethod {
    Bicgstab,
    Gmres,
}

#[derive(Debug, Clone, Copy, Serialize)]
pub struct LinearStats {
    pub method: KrylovMethod,
    pub iterations: usize,
    /// Final `|b − Ax| / |b|`.
    pub relative_residual: f64,
}

fn matvec(a: &CsMat<f64>, x: &[f64], out: &mut [f64]) {
    for (i, row) in a.outer_iterator().enumerate() {
        out[i] = row.iter().map(|(j, v)| v * x[j]).sum();
    }
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn norm(a: &[f64]) -> f64 {
    dot(a, a).sqrt()
}

fn jacobi(a: &CsMat<f64>) -> Vec<f64> {
    a.outer_iterator()
        .enumerate()
        .map(|(i, row)| {
            let d = row.get(i).copied().unwrap_or(0.0);
            if d.abs() > 1e-300 { 1.0 / d } else { 1.0 }
        })
        .collect()
}

fn true_residual(a: &CsMat<f64>, b: &[f64], x: &[f64]) -> f64 {
    let mut ax = vec![0.0; b.len()];
    matvec(a, x, &mut ax);
    let r: Vec<f64> = b.iter().zip(&ax).map(|(b, a)| b - a).collect();
    norm(&r)
}

/// BiCGSTAB; `None` on breakdown or when the iteration cap is hit.
pub fn bicgstab(a: &CsMat<f64>, b: &[f64], tol: f64, max_iter: usize) -> Option<(Vec<f64>, LinearStats)> {
    let n = b.len();
    let bnorm = norm(b);
    let mut x = vec![0.0; n];
    if bnorm == 0.0 {
        return Some((x, LinearStats { method: KrylovMethod::Bicgstab, iterations: 0, relative_residual: 0.0 }));
    }
    let minv = jacobi(a);
    let mut r = b.to_vec();
    let rhat = r.clone();
    let (mut rho, mut alpha, mut omega) = (1.0f64, 1.0f64, 1.0f64);
    let mut v = vec![0.0; n];
    let mut p = vec![0.0; n];
    let mut y = vec![0.0; n];
    let mut z = vec![0.0; n];
    let mut s = vec![0.0; n];
    let mut t = vec![0.0; n];
    for it in 1..=max_iter {
        let rho_new = dot(&rhat, &r);
        if rho_new.abs() < 1e-300 || omega.abs() < 1e-300 {
            return None;
        }
        let beta = (rho_new / rho) * (alpha / omega);
        rho = rho_new;
        for i in 0..n {
            p[i] = r[i] + beta * (p[i] - omega * v[i]);
            y[i] = minv[i] * p[i];
        }
        matvec(a, &y, &mut v);
        let rv = dot(&rhat, &v);
        if rv.abs() < 1e-300 {
            return None;
        }
        alpha = rho / rv;
        for i in 0..n {
            s[i] = r[i] - alpha * v[i];
        }
        if norm(&s) <= tol * bnorm {
            for i in 0..n {
                x[i] += alpha * y[i];
            }
            let rel = true_residual(a, b, &x) / bnorm;
            return (rel <= 10.0 * tol).then_some((x, LinearStats { method: KrylovMethod::Bicgstab, iterations: it, relative_residual: rel }));
        }
        for i in 0..n {
            z[i] = minv[i] * s[i];
        }
        matvec(a, &z, &mut t);
        let tt = dot(&t, &t);
        if tt < 1e-300 {
            return None;
        }
        omega = dot(&t, &s) / tt;
        for i in 0..n {
            x[i] += alpha * y[i] + omega * z[i];
            r[i] = s[i] - omega * t[i];
        }
        if norm(&r) <= tol * bnorm {
            let rel = true_residual(a, b, &x) / bnorm;
            if rel <= 10.0 * tol {
                return Some((x, LinearStats { method: KrylovMethod::Bicgstab, iterations: it, relative_residual: rel }));
            }
        }
        if !x.iter().all(|v| v.is_finite()) {
            return None;
        }
    }
    None
}

/// Restarted GMRES with right Jacobi preconditioning.
pub fn gmres(a: &CsMat<f64>, b: &[f64], tol: f64, restart: usize, max_iter: usize) -> (Vec<f64>, LinearStats) {
    let n = b.len();
    let bnorm = norm(b);
    let mut x = vec![0.0; n];
    let mut stats = LinearStats { method: KrylovMethod::Gmres, iterations: 0, relative_residual: 0.0 };
    if bnorm == 0.0 {
        return (x, stats);
    }
    let minv = jacobi(a);
    let m = restart.max(1);
    let mut w = vec![0.0; n];
    let mut tmp = vec![0.0; n];
    while stats.iterations < max_iter {
        matvec(a, &x, &mut tmp);
        let r: Vec<f64> = b.iter().zip(&tmp).map(|(b, a)| b - a).collect();
        let beta = norm(&r);
        stats.relative_residual = beta / bnorm;
        if beta <= tol * bnorm {
            break;
        }
        let mut basis: Vec<Vec<f64>> = vec![r.iter().map(|v| v / beta).collect()];
        let mut h = vec![vec![0.0; m]; m + 1];
        let (mut cs, mut sn) = (vec![0.0; m], vec![0.0; m]);
        let mut g = vec![0.0; m + 1];
        g[0] = beta;
        let mut k_used = 0;
        for k in 0..m {
            stats.iterations += 1;
            for i in 0..n {
                tmp[i] = minv[i] * basis[k][i];
            }
            matvec(a, &tmp, &mut w);
            for (j, q) in basis.iter().enumerate() {
                h[j][k] = dot(&w, q);
                for i in 0..n {
                    w[i] -= h[j][k] * q[i];
                }
            }
            h[k + 1][k] = norm(&w);
            for j in 0..k {
                let t = cs[j] * h[j][k] + sn[j] * h[j + 1][k];
                h[j + 1][k] = -sn[j] * h[j][k] + cs[j] * h[j + 1][k];
                h[j][k] = t;
            }
            let d = h[k][k].hypot(h[k + 1][k]);
            (cs[k], sn[k]) = if d == 0.0 { (1.0, 0.0) } else { (h[k][k] / d, h[k + 1][k] / d) };
            h[k][k] = d;
            let hk1 = h[k + 1][k];
            h[k + 1][k] = 0.0;
            g[k + 1] = -sn[k] * g[k];
            g[k] *= cs[k];
            k_used = k + 1;
            if g[k + 1].abs() <= tol * bnorm || hk1 < 1e-300 || stats.iterations >= max_iter {
                break;
            }
            basis.push(w.iter().map(|v| v / hk1).collect());
        }
        let mut yk = vec![0.0; k_used];
        for i in (0..k_used).rev() {
            let s: f64 = (i + 1..k_used).map(|j| h[i][j] * yk[j]).sum();
            yk[i] = (g[i] - s) / h[i][i];
        }
        for (j, &c) in yk.iter().enumerate() {
            for i in 0..n {
                x[i] += c * minv[i] * basis[j][i];
            }
        }
    }
    stats.relative_residual = true_residual(a, b, &x) / bnorm;
    (x, stats)
}

/// BiCGSTAB, falling back to GMRES on breakdown.
pub fn solve(a: &CsMat<f64>, b: &[f64], tol: f64, max_iter: usize) -> (Vec<f64>, LinearStats) {
    bicgstab(a, b, tol, max_iter).unwrap_or_else(|| gmres(a, b, tol, 60, max_iter.max(600)))
}

#[cfg(test)]
mod tests {
    use super::*;
    use sprs::TriMat;

    fn convection_diffusion(n: usize) -> CsMat<f64> {
        let mut t = TriMat::new((n, n));
        for i in 0..n {
            t.add_triplet(i, i, 3.0);
            if i > 0 {
                t.add_triplet(i, i - 1, -1.4);
            }
            if i + 1 < n {
                t.add_triplet(i, i + 1, -0.6);
            }
        }
        t.to_csr()
    }

    #[test]
    fn both_methods_solve_nonsymmetric_system() {
        let a = convection_diffusion(50);
        let xs: Vec<f64> = (0..50).map(|i| (i as f64 * 0.3).sin()).collect();
        let mut b = vec![0.0; 50];
        matvec(&a, &xs, &mut b);
        let (x1, s1) = bicgstab(&a, &b, 1e-12, 500).unwrap();
        let (x2, s2) = gmres(&a, &b, 1e-12, 20, 500);
        assert!(s1.relative_residual < 1e-11 && s2.relative_residual < 1e-11);
        for i in 0..50 {
            assert!((x1[i] - xs[i]).abs() < 1e-9);
            assert!((x2[i] - xs[i]).abs() < 1e-9);
        }
    }

    #[test]
    fn zero_rhs_gives_zero() {
        let a = convection_diffusion(5);
        let (x, s) = solve(&a, &[0.0; 5], 1e-10, 10);
        assert_eq!(x, vec![0.0; 5]);
        assert_eq!(s.iterations, 0);
    }
}
