//! Symmetric functions of eigenvalues and their admissible cones.
//!
//! Three operator families are supported: `σ_k^{1/k}`, the quotient
//! `(σ_k/σ_l)^{1/(k−l)}` and `log P_k`. Every evaluation sorts its input
//! first, so values are bitwise symmetric under permutation of `λ`.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::report::{Comparison, ConditionRecord, ConditionStatus};

/// Largest dimension for which `log P_k` enumerates its index sets.
pub const LOG_PK_MAX_DIM: usize = 12;

/// Default slack used when a point must lie strictly inside a cone.
pub const DEFAULT_INTERIOR_MARGIN: f64 = 1e-9;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum SymError {
    #[error("argument error: {0}")]
    Argument(String),
    #[error("λ outside the admissible cone {cone}: {violated}")]
    Domain { cone: String, violated: String },
}

/// Eigenvalue vector `(λ_1, …, λ_n)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LambdaVec(Vec<f64>);

impl LambdaVec {
    pub fn new(entries: Vec<f64>) -> Result<Self, SymError> {
        if entries.len() < 2 {
            return Err(SymError::Argument(format!(
                "eigenvalue vector needs length >= 2, got {}",
                entries.len()
            )));
        }
        if let Some(bad) = entries.iter().find(|v| !v.is_finite()) {
            return Err(SymError::Argument(format!("non-finite eigenvalue {bad}")));
        }
        Ok(Self(entries))
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn into_inner(self) -> Vec<f64> {
        self.0
    }
}

impl AsRef<[f64]> for LambdaVec {
    fn as_ref(&self) -> &[f64] {
        &self.0
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum ConeKind {
    /// `Γ_k = {σ_j > 0, j ≤ k}`.
    GammaK { k: usize },
    /// `𝒫_k`: every sum of `k` distinct entries is positive.
    PK { k: usize },
    PositiveOrthant,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct ConeSpec {
    pub kind: ConeKind,
    pub n: usize,
}

impl ConeSpec {
    pub fn new(kind: ConeKind, n: usize) -> Result<Self, SymError> {
        let k = match kind {
            ConeKind::GammaK { k } | ConeKind::PK { k } => k,
            ConeKind::PositiveOrthant => 1,
        };
        if k == 0 || k > n {
            return Err(SymError::Argument(format!("cone order k={k} outside 1..={n}")));
        }
        Ok(Self { kind, n })
    }

    pub fn label(&self) -> String {
        match self.kind {
            ConeKind::GammaK { k } => format!("Gamma_{k}(n={})", self.n),
            ConeKind::PK { k } => format!("P_{k}(n={})", self.n),
            ConeKind::PositiveOrthant => format!("Gamma_plus(n={})", self.n),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum OperatorKind {
    /// `f = σ_k^{1/k}` on `Γ_k`.
    SigmaKRoot { k: usize },
    /// `f = (σ_k/σ_l)^{1/(k−l)}` on `Γ_k`, `1 ≤ l < k`.
    SigmaQuotient { k: usize, l: usize },
    /// `f = log P_k` on `𝒫_k`.
    #[serde(rename = "log_pk")]
    LogPK { k: usize },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct OperatorSpec {
    pub kind: OperatorKind,
    pub n: usize,
}

impl OperatorSpec {
    pub fn new(kind: OperatorKind, n: usize) -> Result<Self, SymError> {
        if n < 2 {
            return Err(SymError::Argument(format!("dimension n={n} must be >= 2")));
        }
        match kind {
            OperatorKind::SigmaKRoot { k } => {
                if k == 0 || k > n {
                    return Err(SymError::Argument(format!("k={k} outside 1..={n}")));
                }
            }
            OperatorKind::SigmaQuotient { k, l } => {
                if l == 0 || l >= k || k > n {
                    return Err(SymError::Argument(format!(
                        "quotient needs 1 <= l < k <= n, got k={k}, l={l}, n={n}"
                    )));
                }
            }
            OperatorKind::LogPK { k } => {
                if k == 0 || k > n {
                    return Err(SymError::Argument(format!("k={k} outside 1..={n}")));
                }
                if n > LOG_PK_MAX_DIM {
                    return Err(SymError::Argument(format!(
                        "log P_k enumerates index sets only for n <= {LOG_PK_MAX_DIM}, got n={n}"
                    )));
                }
            }
        }
        Ok(Self { kind, n })
    }

    pub fn sigma_k_root(k: usize, n: usize) -> Result<Self, SymError> {
        Self::new(OperatorKind::SigmaKRoot { k }, n)
    }

    pub fn sigma_quotient(k: usize, l: usize, n: usize) -> Result<Self, SymError> {
        Self::new(OperatorKind::SigmaQuotient { k, l }, n)
    }

    pub fn log_pk(k: usize, n: usize) -> Result<Self, SymError> {
        Self::new(OperatorKind::LogPK { k }, n)
    }

    /// Natural domain of the operator.
    pub fn cone(&self) -> ConeSpec {
        let kind = match self.kind {
            OperatorKind::SigmaKRoot { k } | OperatorKind::SigmaQuotient { k, .. } => {
                ConeKind::GammaK { k }
            }
            OperatorKind::LogPK { k } => ConeKind::PK { k },
        };
        ConeSpec { kind, n: self.n }
    }

    /// Same operator family in another dimension (used by the reduced boundary operator).
    pub fn with_dim(&self, n: usize) -> Result<Self, SymError> {
        Self::new(self.kind, n)
    }

    /// Whether `f` is homogeneous of degree one and vanishes on the cone boundary.
    pub fn is_homogeneous(&self) -> bool {
        !matches!(self.kind, OperatorKind::LogPK { .. })
    }

    pub fn label(&self) -> String {
        match self.kind {
            OperatorKind::SigmaKRoot { k } => format!("sigma_{k}^(1/{k}) (n={})", self.n),
            OperatorKind::SigmaQuotient { k, l } => {
                format!("(sigma_{k}/sigma_{l})^(1/{}) (n={})", k - l, self.n)
            }
            OperatorKind::LogPK { k } => format!("log P_{k} (n={})", self.n),
        }
    }
}

fn sorted_desc(lambda: &[f64]) -> Vec<f64> {
    let mut v = lambda.to_vec();
    v.sort_by(|a, b| b.total_cmp(a));
    v
}

/// `e_0, …, e_k` of the entries, by the running-product recurrence.
fn elementary_upto(sorted: &[f64], k: usize) -> Vec<f64> {
    let mut e = vec![0.0; k + 1];
    e[0] = 1.0;
    for (count, &x) in sorted.iter().enumerate() {
        let top = (count + 1).min(k);
        for j in (1..=top).rev() {
            e[j] += x * e[j - 1];
        }
    }
    e
}

/// `σ_k(λ) = Σ_{i_1<…<i_k} λ_{i_1}⋯λ_{i_k}`, with `σ_0 = 1`.
pub fn sigma_k(lambda: &[f64], k: usize) -> Result<f64, SymError> {
    if k > lambda.len() {
        return Err(SymError::Argument(format!(
            "sigma_k needs 0 <= k <= n={}, got k={k}",
            lambda.len()
        )));
    }
    Ok(elementary_upto(&sorted_desc(lambda), k)[k])
}

/// `σ_k(λ|i)`: the elementary function of `λ` with entry `i` removed.
pub fn sigma_k_without(lambda: &[f64], i: usize, k: usize) -> f64 {
    let mut rest: Vec<f64> = lambda
        .iter()
        .enumerate()
        .filter(|&(j, _)| j != i)
        .map(|(_, &x)| x)
        .collect();
    rest.sort_by(|a, b| b.total_cmp(a));
    if k > rest.len() {
        return 0.0;
    }
    elementary_upto(&rest, k)[k]
}

/// Slack of the tightest defining inequality of the cone.
///
/// `Γ_k`: `min_{j≤k} σ_j`; `𝒫_k`: sum of the `k` smallest entries;
/// `Γ⁺`: smallest entry.
pub fn cone_margin(cone: &ConeSpec, lambda: &[f64]) -> f64 {
    match cone.kind {
        ConeKind::GammaK { k } => {
            let e = elementary_upto(&sorted_desc(lambda), k.min(lambda.len()));
            e[1..].iter().copied().fold(f64::INFINITY, f64::min)
        }
        ConeKind::PK { k } => {
            let mut v = lambda.to_vec();
            v.sort_by(|a, b| a.total_cmp(b));
            v.iter().take(k).sum()
        }
        ConeKind::PositiveOrthant => lambda.iter().copied().fold(f64::INFINITY, f64::min),
    }
}

/// Every defining inequality holds with slack greater than `margin`.
pub fn cone_contains(cone: &ConeSpec, lambda: &[f64], margin: f64) -> bool {
    lambda.iter().all(|v| v.is_finite()) && cone_margin(cone, lambda) > margin
}

fn violated_inequality(cone: &ConeSpec, lambda: &[f64]) -> String {
    match cone.kind {
        ConeKind::GammaK { k } => {
            let e = elementary_upto(&sorted_desc(lambda), k.min(lambda.len()));
            let (j, v) = e
                .iter()
                .enumerate()
                .skip(1)
                .min_by(|a, b| a.1.total_cmp(b.1))
                .map(|(j, v)| (j, *v))
                .unwrap_or((1, f64::NAN));
            format!("sigma_{j} = {v:e} <= 0")
        }
        ConeKind::PK { k } => {
            format!("smallest {k}-fold sum = {:e} <= 0", cone_margin(cone, lambda))
        }
        ConeKind::PositiveOrthant => {
            format!("min entry = {:e} <= 0", cone_margin(cone, lambda))
        }
    }
}

fn check_domain(spec: &OperatorSpec, lambda: &[f64]) -> Result<(), SymError> {
    if lambda.len() != spec.n {
        return Err(SymError::Argument(format!(
            "operator dimension {} does not match λ of length {}",
            spec.n,
            lambda.len()
        )));
    }
    let cone = spec.cone();
    if !cone_contains(&cone, lambda, 0.0) {
        return Err(SymError::Domain {
            cone: cone.label(),
            violated: violated_inequality(&cone, lambda),
        });
    }
    Ok(())
}

/// Calls `visit` with the sum of every `k`-subset of `sorted` and the subset's indices.
fn for_each_k_subset(sorted: &[f64], k: usize, mut visit: impl FnMut(f64, &[usize])) {
    let n = sorted.len();
    let mut idx: Vec<usize> = (0..k).collect();
    loop {
        let s: f64 = idx.iter().map(|&i| sorted[i]).sum();
        visit(s, &idx);
        // advance lexicographic combination
        let mut pos = k;
        while pos > 0 {
            pos -= 1;
            if idx[pos] < n - k + pos {
                idx[pos] += 1;
                for q in pos + 1..k {
                    idx[q] = idx[q - 1] + 1;
                }
                break;
            }
            if pos == 0 {
                return;
            }
        }
        if k == 0 {
            return;
        }
    }
}

/// `f(λ)` for the operator; `λ` must be strictly inside the operator's cone.
pub fn eval_f(spec: &OperatorSpec, lambda: &[f64]) -> Result<f64, SymError> {
    check_domain(spec, lambda)?;
    let sorted = sorted_desc(lambda);
    Ok(match spec.kind {
        OperatorKind::SigmaKRoot { k } => {
            let s = elementary_upto(&sorted, k)[k];
            if k == 1 {
                s
            } else {
                s.powf(1.0 / k as f64)
            }
        }
        OperatorKind::SigmaQuotient { k, l } => {
            let e = elementary_upto(&sorted, k);
            let q = e[k] / e[l];
            if k - l == 1 {
                q
            } else {
                q.powf(1.0 / (k - l) as f64)
            }
        }
        OperatorKind::LogPK { k } => {
            let mut total = 0.0;
            for_each_k_subset(&sorted, k, |s, _| total += s.ln());
            total
        }
    })
}

/// `(f_1, …, f_n)` with `f_i = ∂f/∂λ_i`, computed analytically.
pub fn grad_f(spec: &OperatorSpec, lambda: &[f64]) -> Result<Vec<f64>, SymError> {
    check_domain(spec, lambda)?;
    let n = lambda.len();
    let sorted = sorted_desc(lambda);
    Ok(match spec.kind {
        OperatorKind::SigmaKRoot { k } => {
            if k == 1 {
                return Ok(vec![1.0; n]);
            }
            let s = elementary_upto(&sorted, k)[k];
            let scale = s.powf(1.0 / k as f64 - 1.0) / k as f64;
            (0..n)
                .map(|i| scale * sigma_k_without(lambda, i, k - 1))
                .collect()
        }
        OperatorKind::SigmaQuotient { k, l } => {
            let e = elementary_upto(&sorted, k);
            let q = e[k] / e[l];
            let f = if k - l == 1 { q } else { q.powf(1.0 / (k - l) as f64) };
            let m = (k - l) as f64;
            (0..n)
                .map(|i| {
                    let dk = sigma_k_without(lambda, i, k - 1) / e[k];
                    let dl = sigma_k_without(lambda, i, l - 1) / e[l];
                    f / m * (dk - dl)
                })
                .collect()
        }
        OperatorKind::LogPK { k } => {
            // gradient w.r.t. the sorted entries, then mapped back by value rank
            let mut g_sorted = vec![0.0; n];
            for_each_k_subset(&sorted, k, |s, idx| {
                let inv = 1.0 / s;
                for &i in idx {
                    g_sorted[i] += inv;
                }
            });
            let mut order: Vec<usize> = (0..n).collect();
            order.sort_by(|&a, &b| lambda[b].total_cmp(&lambda[a]));
            let mut g = vec![0.0; n];
            // entries with equal value get the average so the map is permutation-equivariant
            let mut r = 0;
            while r < n {
                let mut q = r + 1;
                while q < n && lambda[order[q]] == lambda[order[r]] {
                    q += 1;
                }
                let avg = g_sorted[r..q].iter().sum::<f64>() / (q - r) as f64;
                for &o in &order[r..q] {
                    g[o] = avg;
                }
                r = q;
            }
            g
        }
    })
}

/// Options for [`verify_structure_with`].
#[derive(Debug, Clone)]
pub struct StructureOptions {
    /// Threshold for the empirical `ν_1` of the f6 inequality; `None` records it only.
    pub f6_threshold: Option<f64>,
    pub concavity_tol: f64,
    pub homogeneity_tol: f64,
    pub boundary_value_tol: f64,
    /// Number of steps of the ladder `s = 1 − 2^{−j}` toward the cone boundary.
    pub boundary_ladder: usize,
}

impl Default for StructureOptions {
    fn default() -> Self {
        Self {
            f6_threshold: None,
            concavity_tol: 1e-10,
            homogeneity_tol: 1e-12,
            boundary_value_tol: 1e-3,
            boundary_ladder: 40,
        }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct StructureReport {
    pub operator: String,
    pub samples: usize,
    pub seed: u64,
    pub records: Vec<ConditionRecord>,
}

impl StructureReport {
    /// All asserted conditions pass.
    pub fn passed(&self) -> bool {
        self.records.iter().all(ConditionRecord::ok)
    }

    pub fn record(&self, id: &str) -> Option<&ConditionRecord> {
        self.records.iter().find(|r| r.id == id)
    }
}

/// Smallest shift `s` with `μ + s𝟏` in the cone, returned as an inside point bracket.
fn boundary_shift(cone: &ConeSpec, mu: &[f64]) -> f64 {
    let scale = mu.iter().fold(0.0f64, |m, v| m.max(v.abs())) + 1.0;
    let mut lo = -scale;
    let mut hi = scale * mu.len() as f64;
    let shifted = |s: f64| mu.iter().map(|v| v + s).collect::<Vec<_>>();
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        if cone_contains(cone, &shifted(mid), 0.0) {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    hi
}

/// A random point of the cone with its boundary shift: `μ + (s* + extra)𝟏`.
fn sample_interior(cone: &ConeSpec, rng: &mut ChaCha8Rng) -> Vec<f64> {
    let mu: Vec<f64> = (0..cone.n).map(|_| rng.random_range(-2.0..2.0)).collect();
    let s = boundary_shift(cone, &mu);
    let extra = rng.random_range(0.05..2.0);
    mu.iter().map(|v| v + s + extra).collect()
}

fn sample_boundary(cone: &ConeSpec, rng: &mut ChaCha8Rng) -> Vec<f64> {
    let mu: Vec<f64> = (0..cone.n).map(|_| rng.random_range(-2.0..2.0)).collect();
    let s = boundary_shift(cone, &mu);
    mu.iter().map(|v| v + s).collect()
}

/// Draws interior points and checks the structure conditions empirically.
pub fn verify_structure(spec: &OperatorSpec, samples: usize, seed: u64) -> StructureReport {
    verify_structure_with(spec, samples, seed, &StructureOptions::default())
}

pub fn verify_structure_with(
    spec: &OperatorSpec,
    samples: usize,
    seed: u64,
    opts: &StructureOptions,
) -> StructureReport {
    let samples = samples.max(1);
    let cone = spec.cone();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let points: Vec<Vec<f64>> = (0..samples).map(|_| sample_interior(&cone, &mut rng)).collect();
    let f = |l: &[f64]| eval_f(spec, l).unwrap_or(f64::NAN);

    let mut records = Vec::new();

    // f1
    let mut min_fi = f64::INFINITY;
    let mut sum_fl_min = f64::INFINITY;
    let mut nu1 = f64::INFINITY;
    let mut nu1_samples = 0;
    for p in &points {
        match grad_f(spec, p) {
            Ok(g) => {
                min_fi = min_fi.min(g.iter().copied().fold(f64::INFINITY, f64::min));
                let s: f64 = g.iter().zip(p).map(|(a, b)| a * b).sum();
                sum_fl_min = sum_fl_min.min(s);
                let denom = 1.0 + g.iter().sum::<f64>();
                for (j, &lj) in p.iter().enumerate() {
                    if lj < 0.0 {
                        nu1 = nu1.min(g[j] / denom);
                        nu1_samples += 1;
                    }
                }
            }
            Err(_) => min_fi = f64::NAN,
        }
    }
    records.push(ConditionRecord::checked(
        "f1",
        samples,
        min_fi,
        Comparison::Positive,
        "min_i f_i over sampled interior points",
    ));

    // f2 midpoint concavity on segments between consecutive independent samples
    let mut conc = f64::INFINITY;
    for _ in 0..samples {
        let a = sample_interior(&cone, &mut rng);
        let b = sample_interior(&cone, &mut rng);
        let mid: Vec<f64> = a.iter().zip(&b).map(|(x, y)| 0.5 * (x + y)).collect();
        let m = f(&mid) - 0.5 * (f(&a) + f(&b));
        conc = conc.min(m);
    }
    records.push(ConditionRecord::checked(
        "f2",
        samples,
        conc,
        Comparison::AtLeast(-opts.concavity_tol),
        "min of f((a+b)/2) - (f(a)+f(b))/2",
    ));

    // f5 decay toward the boundary along s = 1 - 2^{-j}
    let boundary_trials = samples.clamp(1, 200);
    let mut worst_end = f64::NEG_INFINITY;
    let mut min_interior_f = f64::INFINITY;
    for p in points.iter().take(boundary_trials) {
        min_interior_f = min_interior_f.min(f(p));
    }
    for t in 0..boundary_trials {
        let start = &points[t];
        let target = sample_boundary(&cone, &mut rng);
        let mut last = f(start);
        for j in 1..=opts.boundary_ladder {
            let s = 1.0 - (0.5f64).powi(j as i32);
            let lam: Vec<f64> = start
                .iter()
                .zip(&target)
                .map(|(a, b)| (1.0 - s) * a + s * b)
                .collect();
            match eval_f(spec, &lam) {
                Ok(v) => last = v,
                Err(_) => {
                    // rounding pushed the point onto ∂Γ: f is 0 (or −∞) there
                    last = if spec.is_homogeneous() { 0.0 } else { f64::NEG_INFINITY };
                    break;
                }
            }
        }
        worst_end = worst_end.max(last);
    }
    if spec.is_homogeneous() {
        records.push(ConditionRecord::checked(
            "f5",
            boundary_trials,
            opts.boundary_value_tol - worst_end.max(-min_interior_f.min(0.0)),
            Comparison::Positive,
            "boundary_value_tol - max f at the end of the boundary ladder (also requires f > 0 inside)",
        ));
    } else {
        let drop = min_interior_f - worst_end;
        records.push(ConditionRecord {
            id: "f5".into(),
            samples: boundary_trials,
            worst_margin: drop - 10.0,
            comparison: Comparison::Positive,
            status: ConditionStatus::NotApplicable,
            note: "log P_k is unbounded below on the boundary; margin is the observed drop minus 10".into(),
        });
    }

    // f4 homogeneity
    if spec.is_homogeneous() {
        let mut worst_rel = 0.0f64;
        for p in &points {
            let fp = f(p);
            for c in [0.5, 2.0, 10.0] {
                let scaled: Vec<f64> = p.iter().map(|v| c * v).collect();
                let rel = (f(&scaled) - c * fp).abs() / (c * fp.abs());
                worst_rel = worst_rel.max(rel);
            }
        }
        records.push(ConditionRecord::checked(
            "f4",
            samples,
            opts.homogeneity_tol - worst_rel,
            Comparison::AtLeast(0.0),
            "homogeneity_tol - max |f(c λ) - c f(λ)| / (c |f(λ)|), c in {0.5, 2, 10}",
        ));
    } else {
        let p = &points[0];
        let rel = (f(&p.iter().map(|v| 2.0 * v).collect::<Vec<_>>()) - 2.0 * f(p)).abs();
        records.push(ConditionRecord {
            id: "f4".into(),
            samples: 1,
            worst_margin: -rel,
            comparison: Comparison::AtLeast(0.0),
            status: ConditionStatus::NotApplicable,
            note: "log P_k is not homogeneous of degree one".into(),
        });
    }

    // (3I-45)
    records.push(ConditionRecord::checked(
        "3I-45",
        samples,
        sum_fl_min,
        Comparison::AtLeast(0.0),
        "min of sum_i f_i λ_i",
    ));

    // f6 recorded as the empirical ν_1
    let f6 = if nu1_samples == 0 {
        ConditionRecord {
            id: "f6".into(),
            samples: 0,
            worst_margin: f64::NAN,
            comparison: Comparison::Positive,
            status: ConditionStatus::NotApplicable,
            note: "no sampled point has a negative entry".into(),
        }
    } else {
        match opts.f6_threshold {
            Some(th) => ConditionRecord::checked(
                "f6",
                nu1_samples,
                nu1 - th,
                Comparison::AtLeast(0.0),
                &format!("empirical nu_1 = {nu1:e} minus threshold {th:e}"),
            ),
            None => ConditionRecord {
                id: "f6".into(),
                samples: nu1_samples,
                worst_margin: nu1,
                comparison: Comparison::Positive,
                status: ConditionStatus::Informational,
                note: "empirical nu_1 = min f_j / (1 + sum f_i) over samples with λ_j < 0".into(),
            },
        }
    };
    records.push(f6);

    // (gj-I105) divergence of f(σ𝟏)
    let ladder: Vec<f64> = (0..=12).map(|j| 10f64.powi(j)).collect();
    let vals: Vec<f64> = ladder.iter().map(|&s| f(&vec![s; spec.n])).collect();
    let increasing = vals.windows(2).all(|w| w[1] > w[0]);
    let growth = vals[vals.len() - 1] - vals[0] - 10.0;
    records.push(ConditionRecord::checked(
        "gj-I105",
        ladder.len(),
        if increasing { growth } else { f64::NEG_INFINITY },
        Comparison::Positive,
        "f(σ1) strictly increasing over σ = 10^0..10^12, margin f(10^12·1) - f(1) - 10",
    ));

    StructureReport {
        operator: spec.label(),
        samples,
        seed,
        records,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn sigma_k_examples() {
        assert_eq!(sigma_k(&[1.0, 1.0, 1.0], 2).unwrap(), 3.0);
        assert_eq!(sigma_k(&[1.0, 2.0, 3.0], 3).unwrap(), 6.0);
        // 3·(−1) + 3·2 + (−1)·2
        assert_eq!(sigma_k(&[3.0, -1.0, 2.0], 2).unwrap(), 1.0);
        assert!(matches!(sigma_k(&[1.0, 2.0], 3), Err(SymError::Argument(_))));
    }

    #[test]
    fn eval_f_examples() {
        let n = 4;
        let ma = OperatorSpec::sigma_k_root(n, n).unwrap();
        assert_relative_eq!(eval_f(&ma, &[1.0; 4]).unwrap(), 1.0, epsilon = 1e-15);
        let q = OperatorSpec::sigma_quotient(2, 1, 3).unwrap();
        assert_eq!(eval_f(&q, &[1.0, 1.0, 1.0]).unwrap(), 1.0);
        let lp = OperatorSpec::log_pk(2, 2).unwrap();
        assert_relative_eq!(eval_f(&lp, &[1.0, 2.0]).unwrap(), 3f64.ln(), epsilon = 1e-15);
    }

    #[test]
    fn eval_f_outside_cone_reports_inequality() {
        let s2 = OperatorSpec::sigma_k_root(2, 2).unwrap();
        match eval_f(&s2, &[3.0, -1.0]) {
            Err(SymError::Domain { violated, .. }) => assert!(violated.contains("sigma_2")),
            other => panic!("expected domain error, got {other:?}"),
        }
    }

    #[test]
    fn grad_examples() {
        let s1 = OperatorSpec::sigma_k_root(1, 3).unwrap();
        assert_eq!(grad_f(&s1, &[0.3, -0.1, 2.0]).unwrap(), vec![1.0; 3]);
        let ma = OperatorSpec::sigma_k_root(3, 3).unwrap();
        for g in grad_f(&ma, &[1.0; 3]).unwrap() {
            assert_relative_eq!(g, 1.0 / 3.0, epsilon = 1e-15);
        }
    }

    #[test]
    fn cone_examples() {
        for k in 1..=3 {
            let c = ConeSpec::new(ConeKind::GammaK { k }, 3).unwrap();
            assert!(cone_contains(&c, &[1.0; 3], 0.0));
        }
        let g1 = ConeSpec::new(ConeKind::GammaK { k: 1 }, 2).unwrap();
        let g2 = ConeSpec::new(ConeKind::GammaK { k: 2 }, 2).unwrap();
        assert!(cone_contains(&g1, &[3.0, -1.0], 0.0));
        assert!(!cone_contains(&g2, &[3.0, -1.0], 0.0));
        assert!(!cone_contains(&g1, &[-1.0, -1.0], 0.0));
        let p2 = ConeSpec::new(ConeKind::PK { k: 2 }, 3).unwrap();
        assert!(cone_contains(&p2, &[5.0, 1.0, -0.5], 0.0));
        assert!(!cone_contains(&p2, &[5.0, -1.0, -0.5], 0.0));
    }

    #[test]
    fn invalid_specs_rejected() {
        assert!(OperatorSpec::sigma_k_root(0, 3).is_err());
        assert!(OperatorSpec::sigma_k_root(4, 3).is_err());
        assert!(OperatorSpec::sigma_quotient(2, 2, 3).is_err());
        assert!(OperatorSpec::log_pk(2, 13).is_err());
        assert!(LambdaVec::new(vec![1.0]).is_err());
        assert!(LambdaVec::new(vec![1.0, f64::NAN]).is_err());
    }

    #[test]
    fn linear_operator_structure_passes() {
        let s1 = OperatorSpec::sigma_k_root(1, 3).unwrap();
        let rep = verify_structure(&s1, 200, 7);
        assert!(rep.passed(), "{rep:#?}");
        let f2 = rep.record("f2").unwrap();
        assert!(f2.worst_margin.abs() < 1e-12);
        let f1 = rep.record("f1").unwrap();
        assert_eq!(f1.worst_margin, 1.0);
    }

    #[test]
    fn sigma2_decays_toward_boundary_point() {
        let s2 = OperatorSpec::sigma_k_root(2, 2).unwrap();
        let start = [1.0, 1.0];
        let target = [2.0, 0.0];
        let mut last = f64::NAN;
        for j in 1..=40 {
            let s = 1.0 - 0.5f64.powi(j);
            let lam = [(1.0 - s) * start[0] + s * target[0], (1.0 - s) * start[1] + s * target[1]];
            last = eval_f(&s2, &lam).unwrap();
        }
        assert!(last < 1e-3, "f at the end of the ladder = {last}");
    }

    #[test]
    fn linear_homogeneity_is_exact() {
        let s1 = OperatorSpec::sigma_k_root(1, 3).unwrap();
        let l = [1.0, 2.0, 3.0];
        assert_eq!(eval_f(&s1, &[2.0, 4.0, 6.0]).unwrap(), 12.0);
        assert_eq!(eval_f(&s1, &l).unwrap() * 2.0, 12.0);
    }

    #[test]
    fn log_pk_structure_flags_non_homogeneity() {
        let lp = OperatorSpec::log_pk(2, 3).unwrap();
        let rep = verify_structure(&lp, 300, 11);
        assert!(rep.passed(), "{rep:#?}");
        assert_eq!(rep.record("f4").unwrap().status, ConditionStatus::NotApplicable);
        assert_eq!(rep.record("f5").unwrap().status, ConditionStatus::NotApplicable);
    }

    #[test]
    fn f6_threshold_is_compared_when_supplied() {
        let s2 = OperatorSpec::sigma_k_root(2, 3).unwrap();
        let opts = StructureOptions {
            f6_threshold: Some(10.0),
            ..Default::default()
        };
        let rep = verify_structure_with(&s2, 200, 3, &opts);
        assert!(!rep.record("f6").unwrap().ok());
    }
}
