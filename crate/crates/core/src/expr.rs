//! Analytic scalar fields on `chart × [0,T]` used for boundary data,
//! subsolutions, exact solutions and conformal factors.
//!
//! A field is a sum of terms
//! `coeff · e^{−decay·t} · t^{t_power} · Π x_i^{powers_i} · cos(k·x + phase)`.

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExprTerm {
    pub coeff: f64,
    #[serde(default)]
    pub powers: Vec<u32>,
    #[serde(default)]
    pub k: Vec<f64>,
    #[serde(default)]
    pub phase: f64,
    #[serde(default)]
    pub decay: f64,
    #[serde(default)]
    pub t_power: u32,
}

impl ExprTerm {
    pub fn constant(c: f64) -> Self {
        Self {
            coeff: c,
            powers: Vec::new(),
            k: Vec::new(),
            phase: 0.0,
            decay: 0.0,
            t_power: 0,
        }
    }

    pub fn monomial(c: f64, powers: Vec<u32>) -> Self {
        Self {
            powers,
            ..Self::constant(c)
        }
    }

    /// `c · t`.
    pub fn linear_in_t(c: f64) -> Self {
        Self {
            t_power: 1,
            ..Self::constant(c)
        }
    }

    /// `c · e^{−decay·t} · cos(k·x + phase)`.
    pub fn wave(c: f64, k: Vec<f64>, phase: f64, decay: f64) -> Self {
        Self {
            k,
            phase,
            decay,
            ..Self::constant(c)
        }
    }
}

/// Value and derivatives of a field at one point.
#[derive(Debug, Clone, PartialEq)]
pub struct Jet {
    pub value: f64,
    pub dt: f64,
    pub grad: Vec<f64>,
    pub hess: DMatrix<f64>,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(transparent)]
pub struct Expr {
    pub terms: Vec<ExprTerm>,
}

fn ipow(x: f64, p: u32) -> f64 {
    x.powi(p as i32)
}

impl Expr {
    pub fn new(terms: Vec<ExprTerm>) -> Self {
        Self { terms }
    }

    pub fn zero() -> Self {
        Self::default()
    }

    pub fn constant(c: f64) -> Self {
        Self::new(vec![ExprTerm::constant(c)])
    }

    /// `Σ_i x_i²/2` in `n` variables.
    pub fn half_square_norm(n: usize) -> Self {
        Self::new(
            (0..n)
                .map(|i| {
                    let mut p = vec![0; n];
                    p[i] = 2;
                    ExprTerm::monomial(0.5, p)
                })
                .collect(),
        )
    }

    pub fn plus(mut self, other: Expr) -> Self {
        self.terms.extend(other.terms);
        self
    }

    pub fn scaled(mut self, c: f64) -> Self {
        for t in &mut self.terms {
            t.coeff *= c;
        }
        self
    }

    /// Highest coordinate index referenced plus one.
    pub fn arity(&self) -> usize {
        self.terms
            .iter()
            .map(|t| t.powers.len().max(t.k.len()))
            .max()
            .unwrap_or(0)
    }

    pub fn value(&self, x: &[f64], t: f64) -> f64 {
        self.terms.iter().map(|term| term_value(term, x, t)).sum()
    }

    pub fn jet(&self, x: &[f64], t: f64) -> Jet {
        let n = x.len();
        let mut jet = Jet {
            value: 0.0,
            dt: 0.0,
            grad: vec![0.0; n],
            hess: DMatrix::zeros(n, n),
        };
        for term in &self.terms {
            accumulate_term(term, x, t, &mut jet);
        }
        jet
    }
}

fn time_factor(term: &ExprTerm, t: f64) -> (f64, f64) {
    let e = (-term.decay * t).exp();
    let q = term.t_power;
    let tq = ipow(t, q);
    let dtq = if q == 0 { 0.0 } else { q as f64 * ipow(t, q - 1) };
    (e * tq, e * (dtq - term.decay * tq))
}

fn phase_arg(term: &ExprTerm, x: &[f64]) -> f64 {
    term.phase + term.k.iter().zip(x).map(|(k, xi)| k * xi).sum::<f64>()
}

fn term_value(term: &ExprTerm, x: &[f64], t: f64) -> f64 {
    let (tf, _) = time_factor(term, t);
    let m: f64 = term
        .powers
        .iter()
        .zip(x)
        .map(|(&p, &xi)| ipow(xi, p))
        .product();
    term.coeff * tf * m * phase_arg(term, x).cos()
}

fn accumulate_term(term: &ExprTerm, x: &[f64], t: f64, jet: &mut Jet) {
    let n = x.len();
    let p = |i: usize| term.powers.get(i).copied().unwrap_or(0);
    let k = |i: usize| term.k.get(i).copied().unwrap_or(0.0);

    // monomial M and its partials
    let f: Vec<f64> = (0..n).map(|i| ipow(x[i], p(i))).collect();
    let df: Vec<f64> = (0..n)
        .map(|i| if p(i) == 0 { 0.0 } else { p(i) as f64 * ipow(x[i], p(i) - 1) })
        .collect();
    let ddf: Vec<f64> = (0..n)
        .map(|i| {
            if p(i) < 2 {
                0.0
            } else {
                (p(i) * (p(i) - 1)) as f64 * ipow(x[i], p(i) - 2)
            }
        })
        .collect();
    let prod_except = |skip: &[usize]| -> f64 {
        (0..n).filter(|i| !skip.contains(i)).map(|i| f[i]).product()
    };
    let m = prod_except(&[]);
    let dm: Vec<f64> = (0..n).map(|i| df[i] * prod_except(&[i])).collect();

    let arg = phase_arg(term, x);
    let (c, s) = (arg.cos(), arg.sin());
    let (tf, dtf) = time_factor(term, t);
    let a = term.coeff;

    jet.value += a * tf * m * c;
    jet.dt += a * dtf * m * c;
    for i in 0..n {
        jet.grad[i] += a * tf * (dm[i] * c - m * k(i) * s);
    }
    for i in 0..n {
        for j in 0..n {
            let dmm = if i == j {
                ddf[i] * prod_except(&[i])
            } else {
                df[i] * df[j] * prod_except(&[i, j])
            };
            let val = dmm * c - dm[i] * k(j) * s - dm[j] * k(i) * s - m * k(i) * k(j) * c;
            jet.hess[(i, j)] += a * tf * val;
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn sample() -> Expr {
        Expr::new(vec![
            ExprTerm::monomial(1.5, vec![2, 1]),
            ExprTerm::wave(0.7, vec![1.0, -2.0], 0.3, 0.5),
            ExprTerm {
                coeff: -0.4,
                powers: vec![1, 0],
                k: vec![0.0, 1.0],
                phase: 0.1,
                decay: 0.2,
                t_power: 2,
            },
        ])
    }

    #[test]
    fn jet_matches_finite_differences() {
        let e = sample();
        let x = [0.4, -0.7];
        let t = 0.6;
        let j = e.jet(&x, t);
        let h = 1e-5;
        let fd_t = (e.value(&x, t + h) - e.value(&x, t - h)) / (2.0 * h);
        assert_relative_eq!(j.dt, fd_t, epsilon = 1e-8);
        for i in 0..2 {
            let mut xp = x;
            let mut xm = x;
            xp[i] += h;
            xm[i] -= h;
            let fd = (e.value(&xp, t) - e.value(&xm, t)) / (2.0 * h);
            assert_relative_eq!(j.grad[i], fd, epsilon = 1e-8);
            let gp = e.jet(&xp, t).grad;
            let gm = e.jet(&xm, t).grad;
            for k in 0..2 {
                assert_relative_eq!(j.hess[(i, k)], (gp[k] - gm[k]) / (2.0 * h), epsilon = 1e-7);
            }
        }
        assert_relative_eq!(j.value, e.value(&x, t), epsilon = 1e-15);
    }

    #[test]
    fn half_square_norm_hessian_is_identity() {
        let j = Expr::half_square_norm(3).jet(&[0.1, 2.0, -1.0], 0.0);
        assert_eq!(j.hess, DMatrix::identity(3, 3));
        assert_relative_eq!(j.value, 0.5 * (0.01 + 4.0 + 1.0), epsilon = 1e-15);
    }

    #[test]
    fn parses_from_toml_array() {
        #[derive(Deserialize)]
        struct W {
            phi: Expr,
        }
        let w: W = toml::from_str(
            "[[phi]]\ncoeff = 2.0\npowers = [1]\n[[phi]]\ncoeff = 1.0\nt_power = 1\n",
        )
        .unwrap();
        assert_eq!(w.phi.value(&[3.0], 2.0), 8.0);
    }
}
