//! Goodness-of-fit and dependence statistics: one- and two-sample
//! Kolmogorov–Smirnov (optionally weighted), distance correlation with a
//! permutation test, Spearman trend tests and binomial intervals.

use rand::seq::SliceRandom;
use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

/// Significance level used everywhere unless a caller overrides it.
pub const ALPHA: f64 = 0.01;

/// Samples with optional nonnegative weights.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EmpiricalDistribution {
    pub samples: Vec<f64>,
    pub weights: Option<Vec<f64>>,
}

impl EmpiricalDistribution {
    pub fn new(samples: Vec<f64>) -> Self {
        Self {
            samples,
            weights: None,
        }
    }

    /// Panics if lengths differ or the weights have no positive finite mass.
    pub fn weighted(samples: Vec<f64>, weights: Vec<f64>) -> Self {
        assert_eq!(samples.len(), weights.len(), "samples/weights length mismatch");
        let total: f64 = weights.iter().sum();
        assert!(
            total.is_finite() && total > 0.0 && weights.iter().all(|&w| w >= 0.0),
            "weights must be nonnegative with positive finite sum"
        );
        Self {
            samples,
            weights: Some(weights),
        }
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    /// Kish effective sample size; equals `len()` when unweighted.
    pub fn effective_size(&self) -> f64 {
        match &self.weights {
            None => self.samples.len() as f64,
            Some(w) => {
                let s: f64 = w.iter().sum();
                let s2: f64 = w.iter().map(|x| x * x).sum();
                s * s / s2
            }
        }
    }

    /// `(value, normalised weight)` sorted by value, zero weights dropped.
    fn sorted_atoms(&self) -> Vec<(f64, f64)> {
        let mut atoms: Vec<(f64, f64)> = match &self.weights {
            None => {
                let w = 1.0 / self.samples.len() as f64;
                self.samples.iter().map(|&x| (x, w)).collect()
            }
            Some(ws) => {
                let total: f64 = ws.iter().sum();
                self.samples
                    .iter()
                    .zip(ws)
                    .filter(|(_, &w)| w > 0.0)
                    .map(|(&x, &w)| (x, w / total))
                    .collect()
            }
        };
        atoms.sort_by(|a, b| a.0.total_cmp(&b.0));
        atoms
    }

    /// Empirical (weighted) CDF evaluated at `x`.
    pub fn cdf(&self, x: f64) -> f64 {
        match &self.weights {
            None => {
                self.samples.iter().filter(|&&s| s <= x).count() as f64 / self.samples.len() as f64
            }
            Some(ws) => {
                let total: f64 = ws.iter().sum();
                let below: f64 = self
                    .samples
                    .iter()
                    .zip(ws)
                    .filter(|(&s, _)| s <= x)
                    .map(|(_, &w)| w)
                    .sum();
                below / total
            }
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct KsResult {
    pub statistic: f64,
    pub critical_value: f64,
    pub p_value: f64,
    /// Effective sample size used for the critical value (`n m / (n + m)` for two samples).
    pub n_eff: f64,
    pub passed: bool,
}

/// `c(alpha) = sqrt(-ln(alpha / 2) / 2)`; 1.6276 at 1%.
pub fn ks_coefficient(alpha: f64) -> f64 {
    (-(alpha / 2.0).ln() / 2.0).sqrt()
}

pub fn ks_critical_one_sample(n: f64, alpha: f64) -> f64 {
    ks_coefficient(alpha) / n.sqrt()
}

pub fn ks_critical_two_sample(n: f64, m: f64, alpha: f64) -> f64 {
    ks_coefficient(alpha) * ((n + m) / (n * m)).sqrt()
}

/// Asymptotic Kolmogorov tail `P(K > lambda)`.
pub fn kolmogorov_sf(lambda: f64) -> f64 {
    if lambda <= 0.0 {
        return 1.0;
    }
    if lambda < 0.2 {
        return 1.0;
    }
    let mut s = 0.0;
    for k in 1..=100 {
        let k = k as f64;
        let term = (-2.0 * k * k * lambda * lambda).exp();
        s += if (k as i64) % 2 == 1 { term } else { -term };
        if term < 1e-16 {
            break;
        }
    }
    (2.0 * s).clamp(0.0, 1.0)
}

fn ks_p_value(d: f64, n_eff: f64) -> f64 {
    let sn = n_eff.sqrt();
    kolmogorov_sf((sn + 0.12 + 0.11 / sn) * d)
}

/// Sup distance between the (weighted) empirical CDF and `cdf`. `cdf` must be
/// right-continuous; atoms of the reference law are handled because the left
/// limit is approximated by `cdf(x - tiny)`.
pub fn ks_distance_to_cdf<F: Fn(f64) -> f64>(dist: &EmpiricalDistribution, cdf: F) -> f64 {
    let atoms = dist.sorted_atoms();
    let mut d: f64 = 0.0;
    let mut acc = 0.0;
    let mut i = 0;
    while i < atoms.len() {
        let x = atoms[i].0;
        let before = acc;
        while i < atoms.len() && atoms[i].0 == x {
            acc += atoms[i].1;
            i += 1;
        }
        let left = cdf(x - x.abs().max(1.0) * 1e-12);
        let right = cdf(x);
        d = d.max((before - left).abs()).max((acc - right).abs());
    }
    d
}

pub fn ks_one_sample<F: Fn(f64) -> f64>(dist: &EmpiricalDistribution, cdf: F, alpha: f64) -> KsResult {
    let statistic = ks_distance_to_cdf(dist, cdf);
    let n_eff = dist.effective_size();
    let critical_value = ks_critical_one_sample(n_eff, alpha);
    KsResult {
        statistic,
        critical_value,
        p_value: ks_p_value(statistic, n_eff),
        n_eff,
        passed: statistic <= critical_value,
    }
}

/// Sup distance between two (weighted) empirical CDFs.
pub fn ks_distance(a: &EmpiricalDistribution, b: &EmpiricalDistribution) -> f64 {
    let xa = a.sorted_atoms();
    let xb = b.sorted_atoms();
    let (mut i, mut j) = (0, 0);
    let (mut fa, mut fb) = (0.0, 0.0);
    let mut d: f64 = 0.0;
    while i < xa.len() || j < xb.len() {
        let x = match (xa.get(i), xb.get(j)) {
            (Some(p), Some(q)) => p.0.min(q.0),
            (Some(p), None) => p.0,
            (None, Some(q)) => q.0,
            (None, None) => unreachable!(),
        };
        while i < xa.len() && xa[i].0 == x {
            fa += xa[i].1;
            i += 1;
        }
        while j < xb.len() && xb[j].0 == x {
            fb += xb[j].1;
            j += 1;
        }
        d = d.max((fa - fb).abs());
    }
    d
}

pub fn ks_two_sample(a: &EmpiricalDistribution, b: &EmpiricalDistribution, alpha: f64) -> KsResult {
    let statistic = ks_distance(a, b);
    let (n, m) = (a.effective_size(), b.effective_size());
    let n_eff = n * m / (n + m);
    let critical_value = ks_critical_two_sample(n, m, alpha);
    KsResult {
        statistic,
        critical_value,
        p_value: ks_p_value(statistic, n_eff),
        n_eff,
        passed: statistic <= critical_value,
    }
}

/// Two-sample permutation KS for small samples; returns the permutation p-value.
pub fn ks_two_sample_permutation<R: Rng + ?Sized>(
    a: &[f64],
    b: &[f64],
    permutations: usize,
    rng: &mut R,
) -> f64 {
    let observed = ks_distance(
        &EmpiricalDistribution::new(a.to_vec()),
        &EmpiricalDistribution::new(b.to_vec()),
    );
    let mut pooled: Vec<f64> = a.iter().chain(b).copied().collect();
    let mut hits = 0usize;
    for _ in 0..permutations {
        pooled.shuffle(rng);
        let d = ks_distance(
            &EmpiricalDistribution::new(pooled[..a.len()].to_vec()),
            &EmpiricalDistribution::new(pooled[a.len()..].to_vec()),
        );
        if d >= observed - 1e-15 {
            hits += 1;
        }
    }
    (hits + 1) as f64 / (permutations + 1) as f64
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DcorResult {
    pub dcor: f64,
    pub p_value: f64,
    pub permutations: usize,
    pub passed: bool,
}

fn euclid(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum::<f64>().sqrt()
}

fn standardise(cols: &[Vec<f64>]) -> Vec<Vec<f64>> {
    let n = cols.first().map_or(0, Vec::len);
    let dims = cols.len();
    let mut rows = vec![vec![0.0; dims]; n];
    for (d, col) in cols.iter().enumerate() {
        let mean = col.iter().sum::<f64>() / n as f64;
        let sd = (col.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / n as f64).sqrt();
        let sd = if sd > 0.0 { sd } else { 1.0 };
        for (i, &x) in col.iter().enumerate() {
            rows[i][d] = (x - mean) / sd;
        }
    }
    rows
}

struct DistanceTerms {
    row_mean: Vec<f64>,
    grand_mean: f64,
}

fn distance_terms(rows: &[Vec<f64>]) -> DistanceTerms {
    let n = rows.len();
    let row_sum: Vec<f64> = (0..n)
        .into_par_iter()
        .map(|i| rows.iter().map(|r| euclid(&rows[i], r)).sum())
        .collect();
    let grand = row_sum.iter().sum::<f64>() / (n * n) as f64;
    DistanceTerms {
        row_mean: row_sum.into_iter().map(|s| s / n as f64).collect(),
        grand_mean: grand,
    }
}

/// Squared distance covariance (V-statistic) with `y` re-indexed through `perm`.
fn dcov2(x: &[Vec<f64>], tx: &DistanceTerms, y: &[Vec<f64>], ty: &DistanceTerms, perm: &[usize]) -> f64 {
    let n = x.len();
    let cross: f64 = (0..n)
        .into_par_iter()
        .map(|i| {
            let yi = &y[perm[i]];
            let mut s = 0.0;
            for j in 0..n {
                s += euclid(&x[i], &x[j]) * euclid(yi, &y[perm[j]]);
            }
            s
        })
        .sum();
    let rows: f64 = (0..n).map(|i| tx.row_mean[i] * ty.row_mean[perm[i]]).sum();
    cross / (n * n) as f64 + tx.grand_mean * ty.grand_mean - 2.0 * rows / n as f64
}

/// Distance correlation between the vectors `x[.][i]` and `y[.][i]` (columns
/// are coordinates) with a permutation test of independence.
pub fn distance_correlation_test<R: Rng + ?Sized>(
    x_cols: &[Vec<f64>],
    y_cols: &[Vec<f64>],
    permutations: usize,
    alpha: f64,
    rng: &mut R,
) -> DcorResult {
    let x = standardise(x_cols);
    let y = standardise(y_cols);
    assert_eq!(x.len(), y.len(), "dcor needs paired samples");
    let n = x.len();
    let tx = distance_terms(&x);
    let ty = distance_terms(&y);
    let id: Vec<usize> = (0..n).collect();
    let vxy = dcov2(&x, &tx, &y, &ty, &id);
    let vxx = dcov2(&x, &tx, &x, &tx, &id);
    let vyy = dcov2(&y, &ty, &y, &ty, &id);
    let dcor = if vxx * vyy > 0.0 {
        (vxy.max(0.0) / (vxx * vyy).sqrt()).sqrt()
    } else {
        0.0
    };
    let mut perm = id.clone();
    let mut hits = 0usize;
    for _ in 0..permutations {
        perm.shuffle(rng);
        if dcov2(&x, &tx, &y, &ty, &perm) >= vxy - 1e-15 * vxy.abs() {
            hits += 1;
        }
    }
    let p_value = (hits + 1) as f64 / (permutations + 1) as f64;
    DcorResult {
        dcor,
        p_value,
        permutations,
        passed: p_value > alpha,
    }
}

fn ranks(v: &[f64]) -> Vec<f64> {
    let mut idx: Vec<usize> = (0..v.len()).collect();
    idx.sort_by(|&a, &b| v[a].total_cmp(&v[b]));
    let mut r = vec![0.0; v.len()];
    let mut i = 0;
    while i < idx.len() {
        let mut j = i;
        while j + 1 < idx.len() && v[idx[j + 1]] == v[idx[i]] {
            j += 1;
        }
        let avg = (i + j) as f64 / 2.0 + 1.0;
        for &k in &idx[i..=j] {
            r[k] = avg;
        }
        i = j + 1;
    }
    r
}

fn pearson(a: &[f64], b: &[f64]) -> f64 {
    let n = a.len() as f64;
    let ma = a.iter().sum::<f64>() / n;
    let mb = b.iter().sum::<f64>() / n;
    let (mut sab, mut saa, mut sbb) = (0.0, 0.0, 0.0);
    for (x, y) in a.iter().zip(b) {
        sab += (x - ma) * (y - mb);
        saa += (x - ma) * (x - ma);
        sbb += (y - mb) * (y - mb);
    }
    if saa == 0.0 || sbb == 0.0 {
        0.0
    } else {
        sab / (saa * sbb).sqrt()
    }
}

pub fn spearman_rho(a: &[f64], b: &[f64]) -> f64 {
    pearson(&ranks(a), &ranks(b))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TrendResult {
    pub rho: f64,
    /// One-sided p-value for a decreasing trend.
    pub p_value: f64,
    pub passed: bool,
}

fn permutations_of(n: usize) -> Vec<Vec<usize>> {
    if n == 0 {
        return vec![vec![]];
    }
    let mut out = Vec::new();
    for p in permutations_of(n - 1) {
        for pos in 0..=p.len() {
            let mut q = p.clone();
            q.insert(pos, n - 1);
            out.push(q);
        }
    }
    out
}

/// Spearman test that `values` decrease with their index. Exact permutation
/// distribution for up to 8 points, Student-t approximation beyond.
pub fn spearman_decreasing(values: &[f64], alpha: f64) -> TrendResult {
    let n = values.len();
    let index: Vec<f64> = (0..n).map(|i| i as f64).collect();
    let rho = spearman_rho(&index, values);
    let p_value = if n < 3 {
        1.0
    } else if n <= 8 {
        let r = ranks(values);
        let all = permutations_of(n);
        let hits = all
            .iter()
            .filter(|p| {
                let permuted: Vec<f64> = p.iter().map(|&k| r[k]).collect();
                pearson(&index, &permuted) <= rho + 1e-12
            })
            .count();
        hits as f64 / all.len() as f64
    } else {
        use statrs::distribution::{ContinuousCDF, StudentsT};
        let df = (n - 2) as f64;
        let t = rho * (df / (1.0 - rho * rho).max(1e-300)).sqrt();
        StudentsT::new(0.0, 1.0, df).map(|d| d.cdf(t)).unwrap_or(1.0)
    };
    TrendResult {
        rho,
        p_value,
        passed: p_value < alpha,
    }
}

/// Wilson score interval for a binomial proportion at normal quantile `z`.
pub fn wilson_interval(successes: u64, trials: u64, z: f64) -> (f64, f64) {
    if trials == 0 {
        return (0.0, 1.0);
    }
    let n = trials as f64;
    let p = successes as f64 / n;
    let denom = 1.0 + z * z / n;
    let centre = (p + z * z / (2.0 * n)) / denom;
    let half = z * (p * (1.0 - p) / n + z * z / (4.0 * n * n)).sqrt() / denom;
    ((centre - half).max(0.0), (centre + half).min(1.0))
}

/// Two-sided normal quantile for level `alpha` (2.5758 at 1%).
pub fn normal_quantile_two_sided(alpha: f64) -> f64 {
    use statrs::distribution::{ContinuousCDF, Normal};
    Normal::new(0.0, 1.0).unwrap().inverse_cdf(1.0 - alpha / 2.0)
}

/// Mean and standard error of the mean.
pub fn mean_se(v: &[f64]) -> (f64, f64) {
    let n = v.len() as f64;
    if v.is_empty() {
        return (f64::NAN, f64::NAN);
    }
    let m = v.iter().sum::<f64>() / n;
    if v.len() < 2 {
        return (m, f64::NAN);
    }
    let var = v.iter().map(|x| (x - m).powi(2)).sum::<f64>() / (n - 1.0);
    (m, (var / n).sqrt())
}

/// Mean and standard error of a ratio of means `E[a] / E[b]` (delta method, paired).
pub fn ratio_of_means(a: &[f64], b: &[f64]) -> (f64, f64) {
    let n = a.len() as f64;
    let (ma, _) = mean_se(a);
    let (mb, _) = mean_se(b);
    let r = ma / mb;
    let var = a
        .iter()
        .zip(b)
        .map(|(x, y)| (x - r * y).powi(2))
        .sum::<f64>()
        / (n - 1.0);
    (r, (var / n).sqrt() / mb.abs())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::SeedStream;

    fn uniforms(seed: u64, n: usize, shift: f64) -> Vec<f64> {
        let mut r = SeedStream::new(seed, "u").rng(0);
        (0..n).map(|_| r.random::<f64>() + shift).collect()
    }

    #[test]
    fn critical_coefficient_at_one_percent() {
        assert!((ks_coefficient(0.01) - 1.6276).abs() < 1e-4);
        assert!((normal_quantile_two_sided(0.01) - 2.5758).abs() < 1e-4);
    }

    #[test]
    fn identical_samples_have_zero_distance() {
        let a = EmpiricalDistribution::new(uniforms(1, 1000, 0.0));
        let r = ks_two_sample(&a, &a, ALPHA);
        assert_eq!(r.statistic, 0.0);
        assert!(r.passed);
    }

    #[test]
    fn shifted_uniforms_are_rejected() {
        let a = EmpiricalDistribution::new(uniforms(1, 10_000, 0.0));
        let b = EmpiricalDistribution::new(uniforms(2, 10_000, 0.2));
        let r = ks_two_sample(&a, &b, ALPHA);
        assert!((r.statistic - 0.2).abs() < 0.03);
        assert!(!r.passed);
    }

    #[test]
    fn one_sample_handles_atoms() {
        // half the mass at 0, rest uniform on (0,1)
        let cdf = |x: f64| if x < 0.0 { 0.0 } else { (0.5 + 0.5 * x).min(1.0) };
        let mut s = vec![0.0; 5000];
        s.extend(uniforms(3, 5000, 0.0));
        let r = ks_one_sample(&EmpiricalDistribution::new(s), cdf, ALPHA);
        assert!(r.passed, "{r:?}");
        let bad = EmpiricalDistribution::new(uniforms(4, 10_000, 0.0));
        assert!(!ks_one_sample(&bad, cdf, ALPHA).passed);
    }

    #[test]
    fn weighted_distance_matches_replication() {
        let d = EmpiricalDistribution::weighted(vec![0.1, 0.5, 0.9], vec![2.0, 1.0, 1.0]);
        let rep = EmpiricalDistribution::new(vec![0.1, 0.1, 0.5, 0.9]);
        let u = |x: f64| x.clamp(0.0, 1.0);
        assert!((ks_distance_to_cdf(&d, u) - ks_distance_to_cdf(&rep, u)).abs() < 1e-12);
        assert!((d.effective_size() - 16.0 / 6.0).abs() < 1e-12);
        assert!((d.cdf(0.5) - 0.75).abs() < 1e-12);
    }

    #[test]
    fn kolmogorov_tail_values() {
        assert!((kolmogorov_sf(1.6276) - 0.01).abs() < 2e-4);
        assert!((kolmogorov_sf(1.3581) - 0.05).abs() < 5e-4);
    }

    #[test]
    fn dcor_detects_dependence_and_accepts_independence() {
        let x = uniforms(5, 300, 0.0);
        let y = uniforms(6, 300, 0.0);
        let mut r = SeedStream::new(7, "perm").rng(0);
        let indep = distance_correlation_test(&[x.clone()], &[y], 199, ALPHA, &mut r);
        assert!(indep.passed, "{indep:?}");
        let sq: Vec<f64> = x.iter().map(|v| (v - 0.5).powi(2)).collect();
        let dep = distance_correlation_test(&[x], &[sq], 199, ALPHA, &mut r);
        assert!(!dep.passed && dep.dcor > 0.3, "{dep:?}");
    }

    #[test]
    fn spearman_exact_small_n() {
        let t = spearman_decreasing(&[0.4, 0.3, 0.2, 0.1], 0.05);
        assert_eq!(t.rho, -1.0);
        assert!((t.p_value - 1.0 / 24.0).abs() < 1e-12);
        assert!(t.passed);
        assert!(!spearman_decreasing(&[0.1, 0.3, 0.2, 0.4], 0.05).passed);
    }

    #[test]
    fn wilson_contains_truth() {
        let (lo, hi) = wilson_interval(50, 100, 1.96);
        assert!(lo < 0.5 && hi > 0.5 && lo > 0.39 && hi < 0.61);
        assert_eq!(wilson_interval(0, 0, 1.96), (0.0, 1.0));
    }

    #[test]
    fn ratio_of_means_on_proportional_data() {
        let a = [2.0, 4.0, 6.0];
        let b = [1.0, 2.0, 3.0];
        let (r, se) = ratio_of_means(&a, &b);
        assert_eq!(r, 2.0);
        assert_eq!(se, 0.0);
    }
}
