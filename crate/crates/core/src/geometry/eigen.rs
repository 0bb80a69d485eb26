//! Generalized symmetric eigenproblem `S w = λ g w`.

use nalgebra::DMatrix;

use super::GeometryError;

#[derive(Debug, Clone)]
pub struct GeneralizedEigen {
    /// Eigenvalues, descending.
    pub values: Vec<f64>,
    /// Columns are `g`-orthonormal eigenvectors matching `values`.
    pub vectors: DMatrix<f64>,
}

const MAX_SWEEPS: usize = 100;

/// Cyclic Jacobi on a symmetric matrix, sweeping `(p, q)` in row order.
/// Returns eigenvalues (unsorted) and the accumulated rotation.
pub fn jacobi_symmetric(mut a: DMatrix<f64>) -> (Vec<f64>, DMatrix<f64>) {
    let n = a.nrows();
    let mut v = DMatrix::<f64>::identity(n, n);
    let scale = a.iter().map(|x| x * x).sum::<f64>().sqrt();
    for _ in 0..MAX_SWEEPS {
        let mut off = 0.0;
        for p in 0..n {
            for q in p + 1..n {
                off += a[(p, q)] * a[(p, q)];
            }
        }
        if off.sqrt() <= 1e-16 * scale || off == 0.0 {
            break;
        }
        for p in 0..n {
            for q in p + 1..n {
                let apq = a[(p, q)];
                if apq == 0.0 {
                    continue;
                }
                let theta = (a[(q, q)] - a[(p, p)]) / (2.0 * apq);
                let t = theta.signum() / (theta.abs() + (theta * theta + 1.0).sqrt());
                let t = if theta == 0.0 { 1.0 } else { t };
                let c = 1.0 / (t * t + 1.0).sqrt();
                let s = t * c;
                for k in 0..n {
                    let akp = a[(k, p)];
                    let akq = a[(k, q)];
                    a[(k, p)] = c * akp - s * akq;
                    a[(k, q)] = s * akp + c * akq;
                }
                for k in 0..n {
                    let apk = a[(p, k)];
                    let aqk = a[(q, k)];
                    a[(p, k)] = c * apk - s * aqk;
                    a[(q, k)] = s * apk + c * aqk;
                }
                for k in 0..n {
                    let vkp = v[(k, p)];
                    let vkq = v[(k, q)];
                    v[(k, p)] = c * vkp - s * vkq;
                    v[(k, q)] = s * vkp + c * vkq;
                }
            }
        }
    }
    ((0..n).map(|i| a[(i, i)]).collect(), v)
}

/// Solves `S w = λ g w` through the Cholesky factor `g = L Lᵀ`.
pub fn generalized_eigen(s: &DMatrix<f64>, g: &DMatrix<f64>) -> Result<GeneralizedEigen, GeometryError> {
    let n = s.nrows();
    if s.ncols() != n || g.nrows() != n || g.ncols() != n {
        return Err(GeometryError::Validation("eigenproblem matrices must be square and equal size".into()));
    }
    let chol = g.clone().cholesky().ok_or_else(|| GeometryError::NotSpd {
        node: usize::MAX,
        detail: "metric is not positive definite".into(),
    })?;
    let l = chol.l();
    let l_inv = l
        .clone()
        .try_inverse()
        .ok_or_else(|| GeometryError::NotSpd {
            node: usize::MAX,
            detail: "singular Cholesky factor".into(),
        })?;
    let mut c = &l_inv * s * l_inv.transpose();
    // symmetrize against rounding
    for i in 0..n {
        for j in i + 1..n {
            let m = 0.5 * (c[(i, j)] + c[(j, i)]);
            c[(i, j)] = m;
            c[(j, i)] = m;
        }
    }
    let (vals, y) = jacobi_symmetric(c);
    let w = l_inv.transpose() * y;
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| vals[b].total_cmp(&vals[a]));
    let values = order.iter().map(|&i| vals[i]).collect();
    let vectors = DMatrix::from_fn(n, n, |r, col| w[(r, order[col])]);
    Ok(GeneralizedEigen { values, vectors })
}

/// Largest `|λ|` of `S` relative to `g` (spectral norm of `S` w.r.t. `g`).
pub fn spectral_norm(s: &DMatrix<f64>, g: &DMatrix<f64>) -> Result<f64, GeometryError> {
    let e = generalized_eigen(s, g)?;
    Ok(e.values.iter().fold(0.0f64, |m, v| m.max(v.abs())))
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn random_sym(rng: &mut ChaCha8Rng, n: usize) -> DMatrix<f64> {
        let a = DMatrix::from_fn(n, n, |_, _| rng.random_range(-1.0..1.0));
        (&a + a.transpose()) * 0.5
    }

    fn random_spd(rng: &mut ChaCha8Rng, n: usize) -> DMatrix<f64> {
        let a = DMatrix::from_fn(n, n, |_, _| rng.random_range(-1.0..1.0));
        &a * a.transpose() + DMatrix::identity(n, n) * 0.5
    }

    #[test]
    fn identity_metric_sorts_descending() {
        let s = DMatrix::from_diagonal(&nalgebra::DVector::from_vec(vec![-1.0, 3.0]));
        let e = generalized_eigen(&s, &DMatrix::identity(2, 2)).unwrap();
        assert_eq!(e.values, vec![3.0, -1.0]);
    }

    #[test]
    fn scaled_identity_gives_ones() {
        let two = DMatrix::identity(3, 3) * 2.0;
        let e = generalized_eigen(&two, &two).unwrap();
        for v in e.values {
            assert!((v - 1.0).abs() < 1e-15);
        }
    }

    #[test]
    fn residual_and_determinant_oracle() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        for n in [2, 3] {
            for _ in 0..50 {
                let s = random_sym(&mut rng, n);
                let g = random_spd(&mut rng, n);
                let e = generalized_eigen(&s, &g).unwrap();
                let scale = s.norm() + e.values.iter().fold(0.0f64, |m, v| m.max(v.abs())) * g.norm();
                for (i, &lam) in e.values.iter().enumerate() {
                    let w = e.vectors.column(i);
                    let r = &s * w - &g * w * lam;
                    assert!(r.norm() < 1e-10 * scale);
                    let det = (&s - &g * lam).determinant();
                    assert!(det.abs() < 1e-10 * scale.powi(n as i32));
                }
                let gram = e.vectors.transpose() * &g * &e.vectors;
                assert!((gram - DMatrix::identity(n, n)).abs().max() < 1e-12);
            }
        }
    }

    #[test]
    fn non_spd_metric_rejected() {
        let g = DMatrix::from_row_slice(2, 2, &[1.0, 0.0, 0.0, -1.0]);
        assert!(generalized_eigen(&DMatrix::identity(2, 2), &g).is_err());
    }
}
