//! Discrete check of the third- and fourth-order commutation identities
//!
//! `∇_ijk v − ∇_jik v = R^l_kij ∇_l v` and the six-term formula for
//! `∇_ijkl v − ∇_klij v`.
//!
//! Covariant derivatives are built as a tower `T^{(r+1)}_{i a} = P_{(i a)} + C^{(r+1)}_{i a}`
//! where `P` holds nested central partials of `v` keyed by the sorted
//! multi-index and `C^{(r+1)}_{i a} = D_i C^{(r)}_a − Σ_s Γ^m_{i a_s} T^{(r)}_{a[s←m]}`.
//! Partials of `v` therefore commute exactly and the flat residual is zero;
//! the residual is evaluated only at nodes at least `order` nodes from a face.

use std::collections::HashMap;

use super::connection::ConnectionField;
use super::grid::{ChartGrid, ScalarField};
use super::metric::MetricField;
use super::GeometryError;

#[derive(Debug, Clone)]
pub struct CommutationResidual {
    pub order: usize,
    /// Max over index combinations at each node; zero at excluded nodes.
    pub per_node: ScalarField,
    /// `(indices, max residual)` for every index combination.
    pub per_combination: Vec<(Vec<usize>, f64)>,
    pub max: f64,
    pub nodes_checked: usize,
}

/// Rank-`r` tensor as one nodal field per flattened component.
type Tensor = Vec<Vec<f64>>;

struct Tower<'a> {
    grid: &'a ChartGrid,
    conn: &'a ConnectionField,
    n: usize,
    v: &'a [f64],
    partials: HashMap<Vec<usize>, Vec<f64>>,
}

fn unflatten(mut c: usize, n: usize, r: usize) -> Vec<usize> {
    let mut idx = vec![0; r];
    for s in (0..r).rev() {
        idx[s] = c % n;
        c /= n;
    }
    idx
}

fn flatten(idx: &[usize], n: usize) -> usize {
    idx.iter().fold(0, |acc, &i| acc * n + i)
}

impl<'a> Tower<'a> {
    fn partial(&mut self, key: &[usize]) -> Vec<f64> {
        let mut sorted = key.to_vec();
        sorted.sort_unstable();
        if sorted.is_empty() {
            return self.v.to_vec();
        }
        if let Some(p) = self.partials.get(&sorted) {
            return p.clone();
        }
        let inner = self.partial(&sorted[1..]);
        let p = self.grid.derivative(&inner, sorted[0]);
        self.partials.insert(sorted, p.clone());
        p
    }

    /// Returns `(T^{(r+1)}, C^{(r+1)})` from rank-`r` tensors.
    fn raise(&mut self, t: &Tensor, c: &Tensor, r: usize) -> (Tensor, Tensor) {
        let n = self.n;
        let nodes = self.grid.len();
        let comps = n.pow(r as u32 + 1);
        let mut t_next = Vec::with_capacity(comps);
        let mut c_next = Vec::with_capacity(comps);
        for comp in 0..comps {
            let idx = unflatten(comp, n, r + 1);
            let i = idx[0];
            let a = &idx[1..];
            let mut corr = self.grid.derivative(&c[flatten(a, n)], i);
            for s in 0..r {
                for m in 0..n {
                    let mut b = a.to_vec();
                    b[s] = m;
                    let tb = &t[flatten(&b, n)];
                    for node in 0..nodes {
                        corr[node] -= self.conn.gamma(node, m, i, a[s]) * tb[node];
                    }
                }
            }
            let p = self.partial(&idx);
            t_next.push(p.iter().zip(&corr).map(|(x, y)| x + y).collect());
            c_next.push(corr);
        }
        (t_next, c_next)
    }
}

/// Residual of the commutation identity of the given order (3 or 4).
pub fn commutation_residual(
    v: &[f64],
    metric: &MetricField,
    connection: &ConnectionField,
    grid: &ChartGrid,
    order: usize,
) -> Result<CommutationResidual, GeometryError> {
    if order != 3 && order != 4 {
        return Err(GeometryError::Validation(format!(
            "commutation order must be 3 or 4, got {order}"
        )));
    }
    if !connection.has_curvature() {
        return Err(GeometryError::Validation("connection has no curvature; call riemann first".into()));
    }
    if v.len() != grid.len() {
        return Err(GeometryError::Validation("field length does not match grid".into()));
    }
    let n = grid.dim();
    let nodes = grid.len();
    let mut tower = Tower {
        grid,
        conn: connection,
        n,
        v,
        partials: HashMap::new(),
    };
    let t1: Tensor = (0..n).map(|a| tower.partial(&[a])).collect();
    let c1: Tensor = vec![vec![0.0; nodes]; n];
    let (t2, c2) = tower.raise(&t1, &c1, 1);
    let (t3, c3) = tower.raise(&t2, &c2, 2);
    let t4 = if order == 4 {
        Some(tower.raise(&t3, &c3, 3).0)
    } else {
        None
    };

    let checked: Vec<usize> = (0..nodes)
        .filter(|&node| grid.boundary_distance(node) >= order)
        .collect();
    let mut per_node = vec![0.0; nodes];
    let combos = n.pow(order as u32);
    let mut per_combination = Vec::with_capacity(combos);

    let r_up = |node: usize, m: usize, a: usize, b: usize, c: usize| connection.r_up(metric, node, m, a, b, c);

    // ∇_i R^m_{ljk} as nodal fields, only needed for order 4
    let grad_r = if order == 4 {
        let n4 = n.pow(4);
        let rfield: Vec<Vec<f64>> = (0..n4)
            .map(|c| {
                let [p, l, j, k] = [c / n.pow(3), (c / (n * n)) % n, (c / n) % n, c % n];
                (0..nodes).map(|node| connection.r(node, p, l, j, k)).collect()
            })
            .collect();
        let mut out = vec![vec![0.0; nodes]; n * n4];
        for i in 0..n {
            let d: Vec<Vec<f64>> = rfield.iter().map(|f| grid.derivative(f, i)).collect();
            for &node in &checked {
                for c in 0..n4 {
                    let [p, l, j, k] = [c / n.pow(3), (c / (n * n)) % n, (c / n) % n, c % n];
                    let mut s = d[c][node];
                    for m in 0..n {
                        s -= connection.gamma(node, m, i, p) * connection.r(node, m, l, j, k)
                            + connection.gamma(node, m, i, l) * connection.r(node, p, m, j, k)
                            + connection.gamma(node, m, i, j) * connection.r(node, p, l, m, k)
                            + connection.gamma(node, m, i, k) * connection.r(node, p, l, j, m);
                    }
                    out[i * n4 + c][node] = s;
                }
            }
        }
        // raise the first slot: ∇_i R^m_{ljk} = g^{mp} ∇_i R_{pljk}
        let mut raised = vec![vec![0.0; nodes]; n * n4];
        for &node in &checked {
            let gi = &metric.g_inv[node];
            for i in 0..n {
                for c in 0..n4 {
                    let [m, l, j, k] = [c / n.pow(3), (c / (n * n)) % n, (c / n) % n, c % n];
                    let mut s = 0.0;
                    for p in 0..n {
                        s += gi[(m, p)] * out[i * n4 + flatten(&[p, l, j, k], n)][node];
                    }
                    raised[i * n4 + c][node] = s;
                }
            }
        }
        raised
    } else {
        Vec::new()
    };
    let n4 = n.pow(4);
    let grad_r_at = |node: usize, i: usize, m: usize, l: usize, j: usize, k: usize| {
        grad_r[i * n4 + flatten(&[m, l, j, k], n)][node]
    };

    for comp in 0..combos {
        let idx = unflatten(comp, n, order);
        let mut worst = 0.0f64;
        for &node in &checked {
            let res = if order == 3 {
                let (i, j, k) = (idx[0], idx[1], idx[2]);
                let lhs = t3[flatten(&[i, j, k], n)][node] - t3[flatten(&[j, i, k], n)][node];
                let rhs: f64 = (0..n).map(|l| r_up(node, l, k, i, j) * t1[l][node]).sum();
                lhs - rhs
            } else {
                let t4 = t4.as_ref().expect("order 4 tower");
                let (i, j, k, l) = (idx[0], idx[1], idx[2], idx[3]);
                let lhs = t4[flatten(&[i, j, k, l], n)][node] - t4[flatten(&[k, l, i, j], n)][node];
                let hess = |a: usize, b: usize| t2[flatten(&[a, b], n)][node];
                let mut rhs = 0.0;
                for m in 0..n {
                    rhs += r_up(node, m, l, j, k) * hess(i, m)
                        + grad_r_at(node, i, m, l, j, k) * t1[m][node]
                        + r_up(node, m, l, i, k) * hess(j, m)
                        + r_up(node, m, j, i, k) * hess(l, m)
                        + r_up(node, m, j, i, l) * hess(k, m)
                        + grad_r_at(node, k, m, j, i, l) * t1[m][node];
                }
                lhs - rhs
            };
            let a = res.abs();
            worst = worst.max(a);
            per_node[node] = f64::max(per_node[node], a);
        }
        per_combination.push((idx, worst));
    }
    let max = per_combination.iter().map(|c| c.1).fold(0.0, f64::max);
    Ok(CommutationResidual {
        order,
        per_node,
        per_combination,
        max,
        nodes_checked: checked.len(),
    })
}
