//! Named verification jobs. Each returns a [`TestReport`] holding the headline
//! statistic, its threshold, the individual checks, free-form notes and a table
//! of the underlying curve data.

use std::collections::BTreeMap;

use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use serde_json::Value;

use crate::conditioning::{
    decompose_at_minimum, entrance_law_cdf, minimum_law_cdf,
    sample_conditioned_many, sample_post_min_limit_construction, size_biased_cdf,
    ConditionedSampleConfig,
};
use crate::error::{Error, Result};
use crate::harmonic::{
    estimate_h_exit_ratio, estimate_h_ladder, HarmonicEstimate, LadderConfig,
};
use crate::models::{classify, IncrementSampler, LevyModelSpec, ModelFamily};
use crate::path::{grid_steps, GridPath};
use crate::rng::SeedStream;
use crate::stats::{
    distance_correlation_test, ks_critical_two_sample, ks_one_sample, ks_two_sample,
    spearman_decreasing, wilson_interval, EmpiricalDistribution, ALPHA,
};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Outcome {
    Pass,
    Fail,
    Inconclusive,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Relation {
    AtMost,
    AtLeast,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Check {
    pub name: String,
    pub statistic: f64,
    pub threshold: f64,
    pub relation: Relation,
    pub passed: bool,
}

impl Check {
    pub fn at_most(name: impl Into<String>, statistic: f64, threshold: f64) -> Self {
        Self {
            name: name.into(),
            statistic,
            threshold,
            relation: Relation::AtMost,
            passed: statistic <= threshold,
        }
    }

    pub fn at_least(name: impl Into<String>, statistic: f64, threshold: f64) -> Self {
        Self {
            name: name.into(),
            statistic,
            threshold,
            relation: Relation::AtLeast,
            passed: statistic >= threshold,
        }
    }

    pub fn boolean(name: impl Into<String>, ok: bool) -> Self {
        Self::at_least(name, if ok { 1.0 } else { 0.0 }, 1.0)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Table {
    pub columns: Vec<String>,
    pub rows: Vec<Vec<f64>>,
}

impl Table {
    pub fn new(columns: &[&str]) -> Self {
        Self {
            columns: columns.iter().map(|s| s.to_string()).collect(),
            rows: Vec::new(),
        }
    }

    pub fn push(&mut self, row: Vec<f64>) {
        debug_assert_eq!(row.len(), self.columns.len());
        self.rows.push(row);
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TestReport {
    pub test_name: String,
    pub model_label: String,
    pub statistic: f64,
    pub critical_value: f64,
    pub passed: bool,
    pub outcome: Outcome,
    pub n_samples: u64,
    pub seeds: Vec<u64>,
    pub parameters: BTreeMap<String, Value>,
    pub checks: Vec<Check>,
    pub notes: Vec<String>,
    pub table: Option<Table>,
}

impl TestReport {
    pub fn new(test_name: &str, model_label: &str) -> Self {
        Self {
            test_name: test_name.into(),
            model_label: model_label.into(),
            statistic: f64::NAN,
            critical_value: f64::NAN,
            passed: false,
            outcome: Outcome::Inconclusive,
            n_samples: 0,
            seeds: Vec::new(),
            parameters: BTreeMap::new(),
            checks: Vec::new(),
            notes: Vec::new(),
            table: None,
        }
    }

    pub fn param(&mut self, key: &str, value: impl Serialize) -> &mut Self {
        self.parameters
            .insert(key.into(), serde_json::to_value(value).unwrap_or(Value::Null));
        self
    }

    pub fn push_check(&mut self, check: Check) -> &mut Self {
        self.checks.push(check);
        self
    }

    pub fn note(&mut self, note: impl Into<String>) -> &mut Self {
        self.notes.push(note.into());
        self
    }

    pub fn finish_with(&mut self, statistic: f64, critical_value: f64, passed: bool) {
        self.statistic = statistic;
        self.critical_value = critical_value;
        self.passed = passed;
        self.outcome = if passed { Outcome::Pass } else { Outcome::Fail };
    }

    /// Pass iff every check passed; the first check becomes the headline.
    pub fn finish(&mut self) {
        let passed = !self.checks.is_empty() && self.checks.iter().all(|c| c.passed);
        let (s, c) = self
            .checks
            .first()
            .map_or((f64::NAN, f64::NAN), |c| (c.statistic, c.threshold));
        self.finish_with(s, c, passed);
    }

    pub fn inconclusive(&mut self, reason: impl Into<String>) {
        self.notes.push(reason.into());
        self.passed = false;
        self.outcome = Outcome::Inconclusive;
    }

    /// One line summary: `PASS name [label]: check=stat (<= thr), ...`.
    pub fn summary_line(&self) -> String {
        let verdict = match self.outcome {
            Outcome::Pass => "PASS",
            Outcome::Fail => "FAIL",
            Outcome::Inconclusive => "INCONCLUSIVE",
        };
        let checks: Vec<String> = self
            .checks
            .iter()
            .map(|c| {
                let rel = match c.relation {
                    Relation::AtMost => "<=",
                    Relation::AtLeast => ">=",
                };
                format!(
                    "{}{}={:.4} ({rel} {:.4})",
                    if c.passed { "" } else { "!" },
                    c.name,
                    c.statistic,
                    c.threshold
                )
            })
            .collect();
        format!("{verdict} {} [{}]: {}", self.test_name, self.model_label, checks.join(", "))
    }
}

fn ks_report(name: &str, label: &str, r: crate::stats::KsResult, n: u64) -> TestReport {
    let mut rep = TestReport::new(name, label);
    rep.n_samples = n;
    rep.push_check(Check::at_most("ks", r.statistic, r.critical_value));
    rep.note(format!("p_value={:.4} n_eff={:.1}", r.p_value, r.n_eff));
    rep.finish();
    rep
}

/// Two-sample KS (weighted samples use their effective size).
pub fn ks_two_sample_report(a: &EmpiricalDistribution, b: &EmpiricalDistribution) -> TestReport {
    let r = ks_two_sample(a, b, ALPHA);
    ks_report("ks_two_sample", "-", r, (a.len() + b.len()) as u64)
}

pub fn ks_one_sample_report<F: Fn(f64) -> f64>(a: &EmpiricalDistribution, cdf: F) -> TestReport {
    let r = ks_one_sample(a, cdf, ALPHA);
    ks_report("ks_one_sample", "-", r, a.len() as u64)
}

fn conditioned_cfg(cfg: &ConditionedSampleConfig, seeds: &SeedStream) -> ConditionedSampleConfig {
    ConditionedSampleConfig {
        seed: seeds.child("conditioned").seed(),
        ..cfg.clone()
    }
}

// ---------------------------------------------------------------- minimum law

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MinLawConfig {
    pub sampler: ConditionedSampleConfig,
    pub n_samples: usize,
}

/// Law of the overall minimum `U` of conditioned paths from `x0` against
/// `P(U >= y) = h(x0 - y) / h(x0)`.
///
/// `diagnostic_h`, if given, is a second harmonic table (e.g. the skeleton's own)
/// whose KS distance is reported as a note without affecting the verdict.
pub fn verify_min_law(
    spec: &LevyModelSpec,
    h_est: &HarmonicEstimate,
    cfg: &MinLawConfig,
    diagnostic_h: Option<&HarmonicEstimate>,
    seeds: &SeedStream,
) -> Result<TestReport> {
    let x0 = cfg.sampler.x0;
    h_est.eval(x0)?;
    let scfg = conditioned_cfg(&cfg.sampler, seeds);
    let (us, stats) = sample_conditioned_many(spec, &scfg, cfg.n_samples, |cp| {
        cp.path.values[..=cp.clock_index]
            .iter()
            .copied()
            .fold(f64::INFINITY, f64::min)
    })?;
    let cdf_for = |h: &HarmonicEstimate| {
        let h = h.clone();
        move |y: f64| {
            if y >= x0 {
                1.0
            } else {
                1.0 - minimum_law_cdf(&h, x0, y).unwrap_or(f64::NAN)
            }
        }
    };
    let dist = EmpiricalDistribution::new(us.clone());
    let ks = ks_one_sample(&dist, cdf_for(h_est), ALPHA);

    let mut rep = TestReport::new("min_law", &spec.label);
    rep.param("x0", x0)
        .param("epsilon", scfg.epsilon)
        .param("dt", scfg.dt)
        .param("n_samples", cfg.n_samples)
        .param("h_method", h_est.method.as_str());
    rep.n_samples = cfg.n_samples as u64;
    rep.seeds.push(scfg.seed);
    rep.push_check(Check::at_most("ks_vs_h_law", ks.statistic, ks.critical_value));

    let atom = us.iter().filter(|&&u| u >= x0).count() as u64;
    if !classify(spec)?.regular_downwards {
        let expected = h_est.eval(0.0)? / h_est.eval(x0)?;
        let z = crate::stats::normal_quantile_two_sided(ALPHA);
        let (lo, hi) = wilson_interval(atom, cfg.n_samples as u64, z);
        rep.push_check(Check::boolean(
            format!("atom_at_x0 {expected:.4} in [{lo:.4}, {hi:.4}]"),
            (lo..=hi).contains(&expected),
        ));
    }
    rep.note(format!(
        "acceptance_rate={:.5} attempts={} p_value={:.3e} empirical P(U = x0)={:.5}",
        stats.acceptance_rate(),
        stats.attempts,
        ks.p_value,
        atom as f64 / cfg.n_samples as f64
    ));
    if let Some(dh) = diagnostic_h {
        let d = ks_one_sample(&dist, cdf_for(dh), ALPHA);
        rep.note(format!(
            "diagnostic: KS against the {} table = {:.5} (critical {:.5})",
            dh.method.as_str(),
            d.statistic,
            d.critical_value
        ));
    }
    let mut table = Table::new(&["y", "empirical_p_u_ge_y", "reference"]);
    for i in 0..=20 {
        let y = x0 * i as f64 / 20.0;
        let emp = us.iter().filter(|&&u| u >= y).count() as f64 / us.len() as f64;
        table.push(vec![y, emp, minimum_law_cdf(h_est, x0, y)?]);
    }
    rep.table = Some(table);
    rep.finish();
    Ok(rep)
}

// ------------------------------------------------------------- h consistency

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum ShapeCheck {
    /// `h(x)/h(y)` within `rel_tol` of `target` for the listed pair.
    Ratio { x: f64, y: f64, target: f64, rel_tol: f64 },
    /// `ln(h(x)/h(y)) / ln(x/y)` within `rel_tol` of `exponent` for every pair.
    Exponent { exponent: f64, rel_tol: f64 },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HConsistencyConfig {
    pub pairs: Vec<(f64, f64)>,
    pub levels: Vec<f64>,
    pub ladder: LadderConfig,
    pub barrier: f64,
    pub exit_dt: f64,
    pub exit_paths: usize,
    pub max_steps: usize,
    pub shape: Option<ShapeCheck>,
}

/// Ladder and exit-ratio estimates of `h(x)/h(y)` agree within 3 combined
/// standard errors; optional check of the known shape.
pub fn verify_h_consistency(
    spec: &LevyModelSpec,
    cfg: &HConsistencyConfig,
    seeds: &SeedStream,
) -> Result<(TestReport, HarmonicEstimate)> {
    let h = estimate_h_ladder(spec, &cfg.levels, &cfg.ladder, &seeds.child("ladder"))?;
    let mut rep = TestReport::new("h_consistency", &spec.label);
    rep.param("pairs", &cfg.pairs)
        .param("ladder_dt", cfg.ladder.dt)
        .param("ladder_paths", cfg.ladder.n_paths)
        .param("ladder_horizon", cfg.ladder.horizon)
        .param("barrier", cfg.barrier)
        .param("exit_dt", cfg.exit_dt)
        .param("exit_paths", cfg.exit_paths);
    rep.n_samples = (cfg.ladder.n_paths + 2 * cfg.exit_paths * cfg.pairs.len()) as u64;
    rep.seeds.push(seeds.seed());
    let mut table = Table::new(&["x", "y", "ladder_ratio", "ladder_se", "exit_ratio", "exit_se", "z"]);
    for (i, &(x, y)) in cfg.pairs.iter().enumerate() {
        let (lr, lse) = h.ratio(x, y)?;
        let ex = estimate_h_exit_ratio(
            spec,
            x,
            y,
            cfg.barrier,
            cfg.exit_dt,
            cfg.exit_paths,
            cfg.max_steps,
            &seeds.child(&format!("exit-{i}")),
        )?;
        let se = (lse * lse + ex.stderr * ex.stderr).sqrt();
        let z = (lr - ex.ratio).abs() / se;
        rep.push_check(Check::at_most(format!("agree({x},{y})"), z, 3.0));
        table.push(vec![x, y, lr, lse, ex.ratio, ex.stderr, z]);
        if ex.unresolved > 0 {
            rep.note(format!("({x},{y}): {} exit paths hit the step cap", ex.unresolved));
        }
        match cfg.shape {
            Some(ShapeCheck::Exponent { exponent, rel_tol }) => {
                for (name, r) in [("ladder", lr), ("exit", ex.ratio)] {
                    let g = r.ln() / (x / y).ln();
                    rep.push_check(Check::at_most(
                        format!("{name}_exponent({x},{y})={g:.4} rel_err"),
                        (g - exponent).abs() / exponent,
                        rel_tol,
                    ));
                }
            }
            Some(ShapeCheck::Ratio { x: sx, y: sy, target, rel_tol }) if sx == x && sy == y => {
                for (name, r) in [("ladder", lr), ("exit", ex.ratio)] {
                    rep.push_check(Check::at_most(
                        format!("{name}_ratio({x},{y})={r:.4} rel_err"),
                        (r - target).abs() / target,
                        rel_tol,
                    ));
                }
            }
            _ => {}
        }
    }
    rep.note(h.normalization_note.clone());
    rep.table = Some(table);
    rep.finish();
    Ok((rep, h))
}

// --------------------------------------------------------------- entrance law

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EntranceReference {
    /// `x pi(dx) / ∫ u pi(du)`
    SizeBiased,
    /// `h(x) pi(dx) / ∫ h dpi`
    HWeighted,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EntranceConfig {
    pub t_large: f64,
    pub dt: f64,
    pub n_samples: usize,
    pub reference: EntranceReference,
}

/// First positive value of the last-zero construction against the entrance law.
pub fn verify_entrance_law(
    spec: &LevyModelSpec,
    cfg: &EntranceConfig,
    seeds: &SeedStream,
) -> Result<TestReport> {
    let ModelFamily::SpectrallyPositiveCpDrift { jump_law, .. } = spec.family else {
        return Err(Error::OutsideValidity {
            label: spec.label.clone(),
            reason: "entrance law test needs a spectrally positive bounded-variation model".into(),
        });
    };
    let firsts: Vec<Result<f64>> = (0..cfg.n_samples as u64)
        .into_par_iter()
        .map(|i| {
            let mut rng = seeds.rng(i);
            loop {
                if let Some(seg) = sample_post_min_limit_construction(spec, cfg.t_large, cfg.dt, &mut rng)? {
                    return Ok(seg.values[1]);
                }
            }
        })
        .collect();
    let firsts: Vec<f64> = firsts.into_iter().collect::<Result<_>>()?;
    let dist = EmpiricalDistribution::new(firsts);
    let size_biased = |x: f64| size_biased_cdf(jump_law, x);
    let weighted = |x: f64| entrance_law_cdf(spec, x).unwrap_or(f64::NAN);
    let ks_sb = ks_one_sample(&dist, size_biased, ALPHA);
    let ks_hw = ks_one_sample(&dist, weighted, ALPHA);
    let (main, other, main_name, other_name) = match cfg.reference {
        EntranceReference::SizeBiased => (ks_sb, ks_hw, "size_biased", "h_weighted"),
        EntranceReference::HWeighted => (ks_hw, ks_sb, "h_weighted", "size_biased"),
    };
    let mut rep = TestReport::new("entrance_law", &spec.label);
    rep.param("t_large", cfg.t_large)
        .param("dt", cfg.dt)
        .param("reference", cfg.reference);
    rep.n_samples = cfg.n_samples as u64;
    rep.seeds.push(seeds.seed());
    rep.push_check(Check::at_most(format!("ks_vs_{main_name}"), main.statistic, main.critical_value));
    rep.note(format!(
        "diagnostic: KS against the {other_name} law = {:.5} (critical {:.5}); drifts up: {}",
        other.statistic,
        other.critical_value,
        spec.downward_exit_rate().is_some()
    ));
    let mut table = Table::new(&["x", "empirical_cdf", "size_biased_cdf", "h_weighted_cdf"]);
    let top = dist.samples.iter().copied().fold(0.0, f64::max);
    for i in 1..=40 {
        let x = top * i as f64 / 40.0;
        table.push(vec![x, dist.cdf(x), size_biased(x), weighted(x)]);
    }
    rep.table = Some(table);
    rep.finish();
    Ok(rep)
}

// ----------------------------------------------------------- weak convergence

/// CDF of the time-`t` marginal of the 3-dimensional Bessel process from 0.
pub fn bes3_cdf(t: f64, y: f64) -> f64 {
    if y <= 0.0 {
        return 0.0;
    }
    let s = y / t.sqrt();
    statrs::function::erf::erf(s / std::f64::consts::SQRT_2)
        - (2.0 / std::f64::consts::PI).sqrt() * s * (-s * s / 2.0).exp()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InProofConfig {
    pub x: f64,
    pub m_threshold: f64,
    pub eta: f64,
    pub sampler: ConditionedSampleConfig,
    pub n_samples: usize,
    pub max_probability: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum LimitReference {
    /// Closed-form Bessel(3) marginal, for Brownian motion with unit variance.
    Bes3,
    /// Samples of the last-zero construction.
    LimitConstruction { t_large: f64, dt: f64, n_samples: usize },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WeakConvergenceConfig {
    pub x_grid: Vec<f64>,
    pub t: f64,
    pub dt: f64,
    /// Keep adding paths until the weighted sample has this Kish effective size.
    pub n_eff_target: f64,
    pub batch: usize,
    pub max_paths: usize,
    pub reference: LimitReference,
    pub trend_alpha: f64,
    /// Weight each Brownian step by its bridge survival probability instead of
    /// monitoring only at grid times (Brownian motion with drift only).
    #[serde(default)]
    pub bridge_correction: bool,
    pub in_proof: Option<InProofConfig>,
}

/// Diffusion coefficient of a pure Brownian model, for bridge-corrected killing.
fn bridge_sigma(spec: &LevyModelSpec) -> Result<f64> {
    match spec.family {
        ModelFamily::BrownianWithDrift { sigma, .. } if sigma > 0.0 => Ok(sigma),
        _ => Err(Error::OutsideValidity {
            label: spec.label.clone(),
            reason: "bridge-corrected killing needs Brownian motion with sigma > 0".into(),
        }),
    }
}

/// Time-`t` marginal under the conditioned law from `x`, by h-transform weights
/// on unconditioned paths. Returns the weighted sample and the paths used.
///
/// With `bridge` the path survives each step from `a` to `b` with probability
/// `1 - exp(-2ab / (sigma^2 dt))`, which makes the killing exact for Brownian motion.
#[allow(clippy::too_many_arguments)]
pub fn conditioned_marginal_weighted(
    spec: &LevyModelSpec,
    h_est: &HarmonicEstimate,
    x: f64,
    t: f64,
    dt: f64,
    n_eff_target: f64,
    batch: usize,
    max_paths: usize,
    bridge: bool,
    seeds: &SeedStream,
) -> Result<(EmpiricalDistribution, usize)> {
    let sampler = IncrementSampler::new(spec, dt)?;
    let two_over_var = if bridge { 2.0 / (bridge_sigma(spec)?.powi(2) * dt) } else { 0.0 };
    let steps = grid_steps(t, dt);
    let hx = h_est.eval(x)?;
    let (mut xs, mut ws) = (Vec::new(), Vec::new());
    let (mut sw, mut sw2) = (0.0, 0.0);
    let mut used = 0usize;
    while used < max_paths {
        let n = batch.min(max_paths - used);
        let out: Vec<Result<Option<(f64, f64)>>> = (used as u64..(used + n) as u64)
            .into_par_iter()
            .map(|p| {
                let mut rng = seeds.rng(p);
                let mut v = x;
                let mut survive = 1.0;
                for _ in 0..steps {
                    let prev = v;
                    v += sampler.sample(&mut rng);
                    if v <= 0.0 {
                        return Ok(None);
                    }
                    if bridge {
                        survive *= -(-two_over_var * prev * v).exp_m1();
                    }
                }
                Ok(Some((v, survive * h_est.eval(v)? / hx)))
            })
            .collect();
        for o in out {
            if let Some((v, w)) = o? {
                xs.push(v);
                ws.push(w);
                sw += w;
                sw2 += w * w;
            }
        }
        used += n;
        if sw2 > 0.0 && sw * sw / sw2 >= n_eff_target {
            break;
        }
    }
    if xs.is_empty() {
        return Err(Error::Degenerate(format!("no path from x={x} survived to t={t}")));
    }
    Ok((EmpiricalDistribution::weighted(xs, ws), used))
}

/// `P(m > m_threshold)` and `P(sup before m > eta)` under rejection sampling from `x`.
fn in_proof_probabilities(
    spec: &LevyModelSpec,
    cfg: &InProofConfig,
    seeds: &SeedStream,
) -> Result<(f64, f64, f64)> {
    let scfg = ConditionedSampleConfig {
        x0: cfg.x,
        seed: seeds.child("in-proof").seed(),
        ..cfg.sampler.clone()
    };
    let (pairs, stats) = sample_conditioned_many(spec, &scfg, cfg.n_samples, |cp| {
        let d = decompose_at_minimum(&cp.conditioned());
        let sup_before = cp.path.values[..=d.m_index]
            .iter()
            .copied()
            .fold(f64::NEG_INFINITY, f64::max);
        (d.m, sup_before)
    })?;
    let n = pairs.len() as f64;
    let pm = pairs.iter().filter(|p| p.0 > cfg.m_threshold).count() as f64 / n;
    let ps = pairs.iter().filter(|p| p.1 > cfg.eta).count() as f64 / n;
    Ok((pm, ps, stats.acceptance_rate()))
}

/// Marginal convergence of the conditioned law from `x` to the limit from 0.
pub fn verify_weak_convergence(
    spec: &LevyModelSpec,
    h_est: &HarmonicEstimate,
    cfg: &WeakConvergenceConfig,
    seeds: &SeedStream,
) -> Result<TestReport> {
    let mut rep = TestReport::new("weak_convergence", &spec.label);
    rep.param("x_grid", &cfg.x_grid)
        .param("t", cfg.t)
        .param("dt", cfg.dt)
        .param("n_eff_target", cfg.n_eff_target)
        .param("reference", &cfg.reference)
        .param("bridge_correction", cfg.bridge_correction)
        .param("h_method", h_est.method.as_str());
    rep.seeds.push(seeds.seed());
    if !classify(spec)?.regular_upwards {
        rep.note("0 is irregular upwards: comparing fixed-time marginals, which is the shifted-process form");
    }
    let limit_sample = match &cfg.reference {
        LimitReference::Bes3 => None,
        LimitReference::LimitConstruction { t_large, dt, n_samples } => {
            let k = grid_steps(cfg.t, *dt);
            let lseeds = seeds.child("limit");
            let vals: Vec<Result<f64>> = (0..*n_samples as u64)
                .into_par_iter()
                .map(|i| {
                    let mut rng = lseeds.rng(i);
                    loop {
                        if let Some(seg) = sample_post_min_limit_construction(spec, *t_large, *dt, &mut rng)? {
                            if seg.values.len() > k {
                                return Ok(seg.values[k]);
                            }
                        }
                    }
                })
                .collect();
            Some(EmpiricalDistribution::new(vals.into_iter().collect::<Result<_>>()?))
        }
    };
    let mut table = Table::new(&["x", "ks_distance", "n_eff", "paths", "critical"]);
    let mut distances = Vec::new();
    let mut last_crit = f64::NAN;
    let mut total = 0u64;
    for (i, &x) in cfg.x_grid.iter().enumerate() {
        let (dist, used) = conditioned_marginal_weighted(
            spec,
            h_est,
            x,
            cfg.t,
            cfg.dt,
            cfg.n_eff_target,
            cfg.batch,
            cfg.max_paths,
            cfg.bridge_correction,
            &seeds.child(&format!("x-{i}")),
        )?;
        total += used as u64;
        let n_eff = dist.effective_size();
        let (d, crit) = match &limit_sample {
            None => {
                let t = cfg.t;
                let d = crate::stats::ks_distance_to_cdf(&dist, |y| bes3_cdf(t, y));
                (d, ks_critical_two_sample(n_eff, n_eff, ALPHA))
            }
            Some(ls) => {
                let r = ks_two_sample(&dist, ls, ALPHA);
                (r.statistic, r.critical_value)
            }
        };
        table.push(vec![x, d, n_eff, used as f64, crit]);
        distances.push(d);
        last_crit = crit;
    }
    rep.n_samples = total;
    let trend = spearman_decreasing(&distances, cfg.trend_alpha);
    rep.push_check(Check::at_most(
        "final_ks",
        *distances.last().unwrap_or(&f64::NAN),
        last_crit,
    ));
    rep.push_check(Check::at_most("spearman_decreasing_p", trend.p_value, cfg.trend_alpha));
    rep.note(format!("distances={distances:?} spearman_rho={:.3}", trend.rho));
    if let Some(ip) = &cfg.in_proof {
        let (pm, ps, acc) = in_proof_probabilities(spec, ip, seeds)?;
        rep.push_check(Check::at_most(
            format!("P_x(m > {}) at x={}", ip.m_threshold, ip.x),
            pm,
            ip.max_probability,
        ));
        rep.push_check(Check::at_most(
            format!("P_x(sup before m > {}) at x={}", ip.eta, ip.x),
            ps,
            ip.max_probability,
        ));
        rep.note(format!(
            "in-proof limits from {} rejection samples (epsilon={}, acceptance {:.4})",
            ip.n_samples, ip.sampler.epsilon, acc
        ));
    }
    rep.table = Some(table);
    rep.finish();
    Ok(rep)
}

// --------------------------------------------------------- excursion identity

/// Excursions observed through a window of `k` grid steps after each new-minimum epoch.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WindowSample {
    /// New-minimum epochs whose window fits inside the simulated path.
    pub epochs: u64,
    /// Reflected value `k` steps after the epoch, for excursions still alive then.
    pub alive_values: Vec<f64>,
}

impl WindowSample {
    /// Per-epoch estimate of `n(f(X_t), t < zeta)`.
    pub fn measure<F: Fn(f64) -> f64>(&self, f: F) -> f64 {
        self.alive_values.iter().map(|&v| f(v)).sum::<f64>() / self.epochs as f64
    }
}

/// Scan `n_paths` paths of length `horizon` from 0 and collect, for every
/// eligible new-minimum epoch, whether its excursion is alive `t` later.
pub fn excursion_window_sample(
    spec: &LevyModelSpec,
    dt: f64,
    t: f64,
    horizon: f64,
    n_paths: usize,
    seeds: &SeedStream,
) -> Result<WindowSample> {
    let sampler = IncrementSampler::new(spec, dt)?;
    let k = grid_steps(t, dt).max(1);
    let steps = grid_steps(horizon, dt);
    if steps < k {
        return Err(Error::InvalidParameter {
            name: "horizon",
            value: horizon,
            constraint: format!("must be >= t = {t}"),
        });
    }
    let parts: Vec<(u64, Vec<f64>)> = (0..n_paths as u64)
        .into_par_iter()
        .map(|p| {
            let mut rng = seeds.rng(p);
            let mut values = Vec::with_capacity(steps + 1);
            let mut epochs_idx = Vec::new();
            let (mut x, mut lo) = (0.0f64, 0.0f64);
            values.push(0.0);
            epochs_idx.push(0usize);
            for j in 1..=steps {
                x += sampler.sample(&mut rng);
                values.push(x);
                if x <= lo {
                    lo = x;
                    epochs_idx.push(j);
                }
            }
            let mut count = 0u64;
            let mut alive = Vec::new();
            for (i, &s) in epochs_idx.iter().enumerate() {
                if s + k > steps {
                    break;
                }
                count += 1;
                let next = epochs_idx.get(i + 1).copied().unwrap_or(usize::MAX);
                if next > s + k {
                    alive.push(values[s + k] - values[s]);
                }
            }
            (count, alive)
        })
        .collect();
    let mut out = WindowSample {
        epochs: 0,
        alive_values: Vec::new(),
    };
    for (c, a) in parts {
        out.epochs += c;
        out.alive_values.extend(a);
    }
    Ok(out)
}

/// Time-`t` values of the last-zero construction (segments shorter than `t` are redrawn).
pub fn limit_marginal_sample(
    spec: &LevyModelSpec,
    t: f64,
    t_large: f64,
    dt: f64,
    n: usize,
    seeds: &SeedStream,
) -> Result<Vec<f64>> {
    let k = grid_steps(t, dt);
    let out: Vec<Result<f64>> = (0..n as u64)
        .into_par_iter()
        .map(|i| {
            let mut rng = seeds.rng(i);
            loop {
                if let Some(seg) = sample_post_min_limit_construction(spec, t_large, dt, &mut rng)? {
                    if seg.values.len() > k {
                        return Ok(seg.values[k]);
                    }
                }
            }
        })
        .collect();
    out.into_iter().collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExcursionIdentityConfig {
    pub t_values: Vec<f64>,
    pub levels_a: Vec<f64>,
    pub dt: f64,
    pub path_horizon: f64,
    pub n_paths: usize,
    pub t_large: f64,
    pub n_limit: usize,
    pub max_residual: f64,
    pub k_stability: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExcursionFit {
    pub t: f64,
    pub k: f64,
    pub lhs: Vec<f64>,
    pub rhs: Vec<f64>,
    pub residuals: Vec<f64>,
    pub alive_excursions: usize,
    pub epochs: u64,
}

/// Fit `n(X_t > a, t < zeta) = k E↑[1{X_t > a} / h(X_t)]` over `levels_a` by least squares.
pub fn fit_excursion_constant(
    spec: &LevyModelSpec,
    h_est: &HarmonicEstimate,
    t: f64,
    cfg: &ExcursionIdentityConfig,
    seeds: &SeedStream,
) -> Result<ExcursionFit> {
    let window = excursion_window_sample(spec, cfg.dt, t, cfg.path_horizon, cfg.n_paths, &seeds.child("exc"))?;
    let up = limit_marginal_sample(spec, t, cfg.t_large, cfg.dt, cfg.n_limit, &seeds.child("limit"))?;
    let inv_h: Vec<f64> = up
        .iter()
        .map(|&y| h_est.eval(y).map(|h| 1.0 / h))
        .collect::<Result<_>>()?;
    let mut lhs = Vec::new();
    let mut rhs = Vec::new();
    for &a in &cfg.levels_a {
        lhs.push(window.measure(|v| if v > a { 1.0 } else { 0.0 }));
        let r: f64 = up
            .iter()
            .zip(&inv_h)
            .filter(|(&y, _)| y > a)
            .map(|(_, &w)| w)
            .sum::<f64>()
            / up.len() as f64;
        rhs.push(r);
    }
    let k = lhs.iter().zip(&rhs).map(|(l, r)| l * r).sum::<f64>()
        / rhs.iter().map(|r| r * r).sum::<f64>();
    let residuals = lhs
        .iter()
        .zip(&rhs)
        .map(|(l, r)| if *l > 0.0 { (l - k * r).abs() / l } else { f64::INFINITY })
        .collect();
    Ok(ExcursionFit {
        t,
        k,
        lhs,
        rhs,
        residuals,
        alive_excursions: window.alive_values.len(),
        epochs: window.epochs,
    })
}

/// One constant `k` links the excursion measure and the limit law across
/// indicator functionals, and is the same for every `t`.
pub fn verify_excursion_identity(
    spec: &LevyModelSpec,
    h_est: &HarmonicEstimate,
    cfg: &ExcursionIdentityConfig,
    seeds: &SeedStream,
) -> Result<(TestReport, Vec<ExcursionFit>)> {
    if classify(spec)?.drifts_to_minus_infinity {
        return Err(Error::OutsideValidity {
            label: spec.label.clone(),
            reason: "the excursion identity is tested for models that do not drift to -inf".into(),
        });
    }
    let mut rep = TestReport::new("excursion_identity", &spec.label);
    rep.param("t_values", &cfg.t_values)
        .param("levels_a", &cfg.levels_a)
        .param("dt", cfg.dt)
        .param("n_paths", cfg.n_paths)
        .param("path_horizon", cfg.path_horizon)
        .param("t_large", cfg.t_large)
        .param("n_limit", cfg.n_limit);
    rep.seeds.push(seeds.seed());
    let mut table = Table::new(&["t", "a", "lhs", "rhs", "k_rhs", "residual"]);
    let mut fits = Vec::new();
    for (i, &t) in cfg.t_values.iter().enumerate() {
        let fit = fit_excursion_constant(spec, h_est, t, cfg, &seeds.child(&format!("t-{i}")))?;
        let worst = fit.residuals.iter().copied().fold(0.0, f64::max);
        rep.push_check(Check::at_most(format!("max_residual(t={t})"), worst, cfg.max_residual));
        for (j, &a) in cfg.levels_a.iter().enumerate() {
            table.push(vec![t, a, fit.lhs[j], fit.rhs[j], fit.k * fit.rhs[j], fit.residuals[j]]);
        }
        rep.note(format!(
            "t={t}: k={:.5} alive excursions={} epochs={}",
            fit.k, fit.alive_excursions, fit.epochs
        ));
        rep.n_samples += fit.epochs;
        fits.push(fit);
    }
    let ks: Vec<f64> = fits.iter().map(|f| f.k).collect();
    if ks.len() >= 2 {
        let lo = ks.iter().copied().fold(f64::INFINITY, f64::min);
        let hi = ks.iter().copied().fold(0.0, f64::max);
        rep.push_check(Check::at_most("k_spread_rel", (hi - lo) / lo, cfg.k_stability));
    }
    rep.push_check(Check::boolean("k_positive", ks.iter().all(|&k| k > 0.0)));
    rep.table = Some(table);
    rep.finish();
    Ok((rep, fits))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EntranceAsymptoticsConfig {
    pub t: f64,
    pub x_grid: Vec<f64>,
    pub dt: f64,
    pub n_paths: usize,
    pub tolerance: f64,
}

/// `E_x[f(X_t); t < tau] / (h(x) k E↑[f(X_t)/h(X_t)]) -> 1` as `x -> 0`.
pub fn verify_entrance_asymptotics<F: Fn(f64) -> f64 + Sync>(
    spec: &LevyModelSpec,
    h_est: &HarmonicEstimate,
    fit: &ExcursionFit,
    limit_values: &[f64],
    window: Option<&WindowSample>,
    f: F,
    cfg: &EntranceAsymptoticsConfig,
    seeds: &SeedStream,
) -> Result<TestReport> {
    let sampler = IncrementSampler::new(spec, cfg.dt)?;
    let steps = grid_steps(cfg.t, cfg.dt);
    let up_term = limit_values
        .iter()
        .map(|&y| Ok(f(y) / h_est.eval(y)?))
        .collect::<Result<Vec<f64>>>()?
        .iter()
        .sum::<f64>()
        / limit_values.len() as f64;
    let n_f = fit.k * up_term;
    let mut rep = TestReport::new("entrance_asymptotics", &spec.label);
    rep.param("t", cfg.t)
        .param("x_grid", &cfg.x_grid)
        .param("dt", cfg.dt)
        .param("n_paths", cfg.n_paths)
        .param("k", fit.k);
    rep.seeds.push(seeds.seed());
    let mut table = Table::new(&["x", "lhs", "lhs_se", "rhs", "ratio"]);
    let mut ratios = Vec::new();
    for (i, &x) in cfg.x_grid.iter().enumerate() {
        let s = seeds.child(&format!("x-{i}"));
        let vals: Vec<f64> = (0..cfg.n_paths as u64)
            .into_par_iter()
            .map(|p| {
                let mut rng = s.rng(p);
                let mut v = x;
                for _ in 0..steps {
                    v += sampler.sample(&mut rng);
                    if v < 0.0 {
                        return 0.0;
                    }
                }
                f(v)
            })
            .collect();
        let (lhs, se) = crate::stats::mean_se(&vals);
        let rhs = h_est.eval(x)? * n_f;
        ratios.push(lhs / rhs);
        table.push(vec![x, lhs, se, rhs, lhs / rhs]);
    }
    rep.n_samples = (cfg.n_paths * cfg.x_grid.len()) as u64;
    let last = *ratios.last().unwrap_or(&f64::NAN);
    rep.push_check(Check::at_most("final_ratio_abs_dev", (last - 1.0).abs(), cfg.tolerance));
    let dev: Vec<f64> = ratios.iter().map(|r| (r - 1.0).abs()).collect();
    let trend = spearman_decreasing(&dev, 0.05);
    rep.note(format!(
        "ratios={ratios:?}; |ratio-1| Spearman rho={:.3} p={:.3} (diagnostic)",
        trend.rho, trend.p_value
    ));
    if let Some(w) = window {
        let direct = w.measure(&f);
        rep.note(format!(
            "direct excursion estimate n(f)={direct:.5e} vs k E↑[f/h]={n_f:.5e}"
        ));
    }
    rep.table = Some(table);
    rep.finish();
    Ok(rep)
}

// ------------------------------------------------------------------- creeping

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HeightSample {
    pub epochs: u64,
    /// Heights of complete excursions, plus excursions stopped once above the top level.
    pub heights: Vec<f64>,
    /// Excursions cut by the step cap before their height was determined.
    pub undetermined: u64,
}

impl HeightSample {
    pub fn tail(&self, x: f64) -> f64 {
        self.heights.iter().filter(|&&h| h > x).count() as f64 / self.epochs as f64
    }
}

/// Excursion heights from `n_paths` paths started at 0; each path stops when an
/// excursion exceeds `x_max` (its height event is then determined for all x <= x_max).
pub fn excursion_heights(
    spec: &LevyModelSpec,
    dt: f64,
    x_max: f64,
    max_steps: usize,
    n_paths: usize,
    seeds: &SeedStream,
) -> Result<HeightSample> {
    let sampler = IncrementSampler::new(spec, dt)?;
    let parts: Vec<(u64, Vec<f64>, u64)> = (0..n_paths as u64)
        .into_par_iter()
        .map(|p| {
            let mut rng = seeds.rng(p);
            let (mut x, mut lo, mut height) = (0.0f64, 0.0f64, 0.0f64);
            let mut epochs = 1u64;
            let mut heights = Vec::new();
            for _ in 0..max_steps {
                x += sampler.sample(&mut rng);
                if x <= lo {
                    if height > 0.0 {
                        heights.push(height);
                    }
                    lo = x;
                    height = 0.0;
                    epochs += 1;
                } else {
                    height = height.max(x - lo);
                    if height > x_max {
                        heights.push(height);
                        return (epochs, heights, 0);
                    }
                }
            }
            (epochs, heights, u64::from(height > 0.0))
        })
        .collect();
    let mut out = HeightSample {
        epochs: 0,
        heights: Vec::new(),
        undetermined: 0,
    };
    for (e, h, u) in parts {
        out.epochs += e;
        out.heights.extend(h);
        out.undetermined += u;
    }
    Ok(out)
}

/// Fraction of paths from 0 whose first passage into `[x, inf)` lands within
/// `tol` of `x`; paths that never pass within `max_steps` are excluded.
pub fn creep_probability(
    spec: &LevyModelSpec,
    x: f64,
    dt: f64,
    tol: f64,
    n_paths: usize,
    max_steps: usize,
    seeds: &SeedStream,
) -> Result<(f64, u64)> {
    let sampler = IncrementSampler::new(spec, dt)?;
    let (hits, resolved) = (0..n_paths as u64)
        .into_par_iter()
        .map(|p| {
            let mut rng = seeds.rng(p);
            let mut v = 0.0;
            for _ in 0..max_steps {
                v += sampler.sample(&mut rng);
                if v >= x {
                    return (u64::from(v - x <= tol), 1u64);
                }
            }
            (0, 0)
        })
        .reduce(|| (0, 0), |a, b| (a.0 + b.0, a.1 + b.1));
    if resolved == 0 {
        return Err(Error::Degenerate(format!("no path reached level {x}")));
    }
    Ok((hits as f64 / resolved as f64, resolved))
}

/// `P↑(X(sigma_x) within tol of x)` on last-zero segments. Segments that end
/// below `clear_factor * x` are treated as censored and excluded.
#[allow(clippy::too_many_arguments)]
pub fn last_passage_creep_probability(
    spec: &LevyModelSpec,
    x: f64,
    dt: f64,
    tol: f64,
    t_large: f64,
    clear_factor: f64,
    n: usize,
    seeds: &SeedStream,
) -> Result<(f64, u64, u64)> {
    let out: Vec<Result<Option<bool>>> = (0..n as u64)
        .into_par_iter()
        .map(|i| {
            let mut rng = seeds.rng(i);
            let seg = loop {
                if let Some(s) = sample_post_min_limit_construction(spec, t_large, dt, &mut rng)? {
                    break s;
                }
            };
            if *seg.values.last().unwrap() < clear_factor * x {
                return Ok(None);
            }
            let k = seg.last_passage(x).unwrap_or(0);
            Ok(Some(seg.values[k + 1] - x <= tol))
        })
        .collect();
    let (mut hits, mut used, mut censored) = (0u64, 0u64, 0u64);
    for o in out {
        match o? {
            Some(h) => {
                used += 1;
                hits += u64::from(h);
            }
            None => censored += 1,
        }
    }
    if used == 0 {
        return Err(Error::Degenerate("every last-passage sample was censored".into()));
    }
    Ok((hits as f64 / used as f64, used, censored))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CreepingConfig {
    /// Descending levels; the first is used to calibrate the normalisation.
    pub x_grid: Vec<f64>,
    pub dt: f64,
    pub n_paths: usize,
    pub max_steps: usize,
    /// Overshoot tolerance in units of the model's one-step scale.
    pub tolerance_c: f64,
    pub product_tolerance: f64,
    pub min_creep_probability: f64,
    pub refine_factor: f64,
    pub passage_paths: usize,
    pub passage_max_steps: usize,
    pub passage_t_large: f64,
    pub last_passage_samples: usize,
}

/// `n(H > x) h(x) -> 1` together with the two creeping probabilities, or, for a
/// model that does not creep, creeping probabilities that stay small.
pub fn verify_creeping_height(
    spec: &LevyModelSpec,
    h_est: Option<&HarmonicEstimate>,
    cfg: &CreepingConfig,
    seeds: &SeedStream,
) -> Result<TestReport> {
    let flags = classify(spec)?;
    let mut rep = TestReport::new(
        if flags.creeps_upwards { "creeping_height" } else { "creeping_counterexample" },
        &spec.label,
    );
    rep.param("x_grid", &cfg.x_grid)
        .param("dt", cfg.dt)
        .param("n_paths", cfg.n_paths)
        .param("tolerance_c", cfg.tolerance_c)
        .param("refine_factor", cfg.refine_factor);
    rep.seeds.push(seeds.seed());
    let smallest = *cfg.x_grid.last().ok_or_else(|| Error::Config("empty x_grid".into()))?;
    let dts = [cfg.dt, cfg.dt / cfg.refine_factor];
    let mut creep_table = Table::new(&["x", "dt", "first_passage_creep", "resolved"]);
    let mut final_creep = Vec::new();
    for (j, &dt) in dts.iter().enumerate() {
        let tol = cfg.tolerance_c * spec.step_scale(dt);
        for (i, &x) in cfg.x_grid.iter().enumerate() {
            if flags.creeps_upwards && x != smallest {
                continue;
            }
            let (p, resolved) = creep_probability(
                spec,
                x,
                dt,
                tol,
                cfg.passage_paths,
                (cfg.passage_max_steps as f64 * cfg.dt / dt) as usize,
                &seeds.child(&format!("first-passage-{j}-{i}")),
            )?;
            creep_table.push(vec![x, dt, p, resolved as f64]);
            if j == 1 {
                final_creep.push((x, p));
            }
        }
    }
    if !flags.creeps_upwards {
        let worst = final_creep.iter().map(|p| p.1).fold(0.0, f64::max);
        let first_pass = creep_table.rows.iter().map(|r| r[2]).fold(0.0, f64::max);
        rep.push_check(Check::at_most("max_creep_probability", worst.max(first_pass), 0.05));
        rep.table = Some(creep_table);
        rep.finish();
        return Ok(rep);
    }
    let h = h_est.ok_or_else(|| Error::Config("creeping height test needs an h estimate".into()))?;
    let x_max = cfg.x_grid.iter().copied().fold(0.0, f64::max);
    let heights = excursion_heights(spec, cfg.dt, x_max, cfg.max_steps, cfg.n_paths, &seeds.child("heights"))?;
    rep.n_samples = heights.epochs;
    let z = crate::stats::normal_quantile_two_sided(ALPHA);
    let mut table = Table::new(&["x", "n_H_gt_x", "h_x", "product", "ci_lo", "ci_hi", "normalised"]);
    let mut products = Vec::new();
    for &x in &cfg.x_grid {
        let count = heights.heights.iter().filter(|&&v| v > x).count() as u64;
        let (lo, hi) = wilson_interval(count, heights.epochs, z);
        let hx = h.eval(x)?;
        let prod = heights.tail(x) * hx;
        products.push(prod);
        table.push(vec![x, heights.tail(x), hx, prod, lo * hx, hi * hx, f64::NAN]);
    }
    let norm = products[0];
    for (row, p) in table.rows.iter_mut().zip(&products) {
        row[6] = p / norm;
    }
    let final_norm = products.last().unwrap() / norm;
    rep.push_check(Check::at_most(
        format!("|normalised product - 1| at x={smallest}"),
        (final_norm - 1.0).abs(),
        cfg.product_tolerance,
    ));
    let first_creep = final_creep.last().map_or(f64::NAN, |p| p.1);
    rep.push_check(Check::at_least("first_passage_creep_probability_refined", first_creep, cfg.min_creep_probability));
    let coarse = creep_table.rows.first().map_or(f64::NAN, |r| r[2]);
    if (first_creep - coarse).abs() > 0.05 {
        rep.note(format!(
            "skeleton-overshoot contamination: refinement moved the creep probability from {coarse:.4} to {first_creep:.4}"
        ));
    }
    let mut last_creep = Vec::new();
    for (j, &dt) in dts.iter().enumerate() {
        let tol = cfg.tolerance_c * spec.step_scale(dt);
        let (p, used, censored) = last_passage_creep_probability(
            spec,
            smallest,
            dt,
            tol,
            cfg.passage_t_large,
            10.0,
            cfg.last_passage_samples,
            &seeds.child(&format!("last-passage-{j}")),
        )?;
        last_creep.push(p);
        rep.note(format!(
            "last-passage creep at dt={dt}: {p:.4} ({used} used, {censored} censored)"
        ));
    }
    rep.push_check(Check::at_least(
        "last_passage_creep_probability_refined",
        last_creep[1],
        cfg.min_creep_probability,
    ));
    rep.note(format!(
        "epochs={} determinate heights={} undetermined={} raw products={products:?}",
        heights.epochs,
        heights.heights.len(),
        heights.undetermined
    ));
    rep.note(format!("first-passage creep table: {:?}", creep_table.rows));
    rep.table = Some(table);
    rep.finish();
    Ok(rep)
}

// -------------------------------------------------------------- last passage

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LastPassageConfig {
    pub x: f64,
    pub dt: f64,
    pub t_large: f64,
    pub n_samples: usize,
    pub max_steps: usize,
    pub max_censored_fraction: f64,
}

/// Value of the process just after its last visit to `(-inf, x]`, on a
/// last-zero segment; `None` when the segment ends at or below `x`.
pub fn post_last_passage_value(seg: &GridPath, x: f64) -> Option<f64> {
    let k = seg.last_passage(x)?;
    seg.values.get(k + 1).copied()
}

/// `X(tau) + [sup before tau - X(tau-)]` for the first passage into `[x, inf)` from 0.
pub fn first_passage_combination<R: Rng + ?Sized>(
    sampler: &IncrementSampler,
    x: f64,
    max_steps: usize,
    rng: &mut R,
) -> Option<f64> {
    let (mut v, mut sup) = (0.0f64, 0.0f64);
    for _ in 0..max_steps {
        let prev = v;
        v += sampler.sample(rng);
        if v >= x {
            return Some(v + (sup - prev));
        }
        sup = sup.max(v);
    }
    None
}

pub fn verify_last_passage_identity(
    spec: &LevyModelSpec,
    cfg: &LastPassageConfig,
    seeds: &SeedStream,
) -> Result<TestReport> {
    if classify(spec)?.drifts_to_minus_infinity {
        return Err(Error::OutsideValidity {
            label: spec.label.clone(),
            reason: "the last-passage identity needs a model that does not drift to -inf".into(),
        });
    }
    let sampler = IncrementSampler::new(spec, cfg.dt)?;
    let lseeds = seeds.child("lhs");
    let lhs: Vec<Result<Option<f64>>> = (0..cfg.n_samples as u64)
        .into_par_iter()
        .map(|i| {
            let mut rng = lseeds.rng(i);
            loop {
                if let Some(seg) = sample_post_min_limit_construction(spec, cfg.t_large, cfg.dt, &mut rng)? {
                    return Ok(post_last_passage_value(&seg, cfg.x));
                }
            }
        })
        .collect();
    let mut lhs_vals = Vec::new();
    let mut censored = 0usize;
    for v in lhs {
        match v? {
            Some(v) => lhs_vals.push(v),
            None => censored += 1,
        }
    }
    let rseeds = seeds.child("rhs");
    let rhs: Vec<Option<f64>> = (0..cfg.n_samples as u64)
        .into_par_iter()
        .map(|i| first_passage_combination(&sampler, cfg.x, cfg.max_steps, &mut rseeds.rng(i)))
        .collect();
    let rhs_censored = rhs.iter().filter(|v| v.is_none()).count();
    let rhs_vals: Vec<f64> = rhs.into_iter().flatten().collect();

    let mut rep = TestReport::new("last_passage_identity", &spec.label);
    rep.param("x", cfg.x)
        .param("dt", cfg.dt)
        .param("t_large", cfg.t_large)
        .param("n_samples", cfg.n_samples);
    rep.n_samples = 2 * cfg.n_samples as u64;
    rep.seeds.push(seeds.seed());
    let frac = censored.max(rhs_censored) as f64 / cfg.n_samples as f64;
    if lhs_vals.is_empty() || rhs_vals.is_empty() || frac > cfg.max_censored_fraction {
        rep.inconclusive(format!(
            "censored fraction {frac:.4} exceeds {} (lhs {censored}, rhs {rhs_censored}); extend the horizon",
            cfg.max_censored_fraction
        ));
        return Ok(rep);
    }
    let a = EmpiricalDistribution::new(lhs_vals);
    let b = EmpiricalDistribution::new(rhs_vals);
    let ks = ks_two_sample(&a, &b, ALPHA);
    rep.push_check(Check::at_most("ks_two_sample", ks.statistic, ks.critical_value));
    let tol = 2.0 * spec.step_scale(cfg.dt);
    let atom = |d: &EmpiricalDistribution| {
        d.samples.iter().filter(|&&v| (v - cfg.x).abs() <= tol).count() as f64 / d.len() as f64
    };
    rep.note(format!(
        "p_value={:.4}; mass within {tol:.2e} of x: lhs {:.4}, rhs {:.4}; censored lhs {censored}, rhs {rhs_censored}",
        ks.p_value,
        atom(&a),
        atom(&b)
    ));
    let mut table = Table::new(&["value", "lhs_cdf", "rhs_cdf"]);
    let top = a.samples.iter().chain(&b.samples).copied().fold(cfg.x, f64::max);
    for i in 0..=40 {
        let v = cfg.x + (top - cfg.x) * i as f64 / 40.0;
        table.push(vec![v, a.cdf(v), b.cdf(v)]);
    }
    rep.table = Some(table);
    rep.finish();
    Ok(rep)
}

// --------------------------------------------------------------- independence

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IndependenceConfig {
    pub sampler: ConditionedSampleConfig,
    pub n_samples: usize,
    pub lag: f64,
    pub permutations: usize,
}

/// Distance-correlation test between `(m, U)` and the post-minimum value at a
/// fixed lag, with a shuffled control and a deliberately dependent control.
pub fn verify_independence_pre_post(
    spec: &LevyModelSpec,
    cfg: &IndependenceConfig,
    seeds: &SeedStream,
) -> Result<TestReport> {
    let mut scfg = conditioned_cfg(&cfg.sampler, seeds);
    scfg.horizon = scfg.horizon.max(cfg.lag);
    let lag_steps = grid_steps(cfg.lag, scfg.dt);
    let (rows, stats) = sample_conditioned_many(spec, &scfg, cfg.n_samples, |cp| {
        let d = decompose_at_minimum(&cp.conditioned());
        let post = cp.path.values[d.m_index + lag_steps] - d.u;
        (d.m, d.u, post)
    })?;
    let m: Vec<f64> = rows.iter().map(|r| r.0).collect();
    let u: Vec<f64> = rows.iter().map(|r| r.1).collect();
    let post: Vec<f64> = rows.iter().map(|r| r.2).collect();
    let mut rng = seeds.child("perm").rng(0);
    let main = distance_correlation_test(&[m.clone(), u.clone()], &[post.clone()], cfg.permutations, ALPHA, &mut rng);
    let mut shuffled = post.clone();
    {
        use rand::seq::SliceRandom;
        shuffled.shuffle(&mut rng);
    }
    let control = distance_correlation_test(&[m.clone(), u.clone()], &[shuffled], cfg.permutations, ALPHA, &mut rng);
    let dependent = distance_correlation_test(&[m, u.clone()], &[u], cfg.permutations, ALPHA, &mut rng);

    let mut rep = TestReport::new("independence_pre_post", &spec.label);
    rep.param("x0", scfg.x0)
        .param("epsilon", scfg.epsilon)
        .param("dt", scfg.dt)
        .param("lag", cfg.lag)
        .param("permutations", cfg.permutations);
    rep.n_samples = cfg.n_samples as u64;
    rep.seeds.push(scfg.seed);
    rep.push_check(Check::at_least("dcor_p_value", main.p_value, ALPHA + 1e-12));
    rep.push_check(Check::boolean("shuffled_control_accepted", control.passed));
    rep.push_check(Check::boolean("dependent_control_rejected", !dependent.passed));
    rep.note(format!(
        "dcor={:.4} p={:.3}; shuffled dcor={:.4} p={:.3}; dependent dcor={:.4} p={:.3}; acceptance={:.4}",
        main.dcor,
        main.p_value,
        control.dcor,
        control.p_value,
        dependent.dcor,
        dependent.p_value,
        stats.acceptance_rate()
    ));
    rep.finish();
    Ok(rep)
}

// ------------------------------------------------------------ post-min law

/// Post-minimum marginals at `lag` from two starting points agree (two-sample KS).
pub fn verify_post_min_start_independence(
    spec: &LevyModelSpec,
    sampler: &ConditionedSampleConfig,
    x_a: f64,
    x_b: f64,
    lag: f64,
    n_samples: usize,
    seeds: &SeedStream,
) -> Result<TestReport> {
    let lag_steps = grid_steps(lag, sampler.dt);
    let draw = |x0: f64, tag: &str| -> Result<Vec<f64>> {
        let cfg = ConditionedSampleConfig {
            x0,
            horizon: sampler.horizon.max(lag),
            seed: seeds.child(tag).seed(),
            ..sampler.clone()
        };
        let (v, _) = sample_conditioned_many(spec, &cfg, n_samples, |cp| {
            let d = decompose_at_minimum(&cp.conditioned());
            cp.path.values[d.m_index + lag_steps] - d.u
        })?;
        Ok(v)
    };
    let a = EmpiricalDistribution::new(draw(x_a, "a")?);
    let b = EmpiricalDistribution::new(draw(x_b, "b")?);
    let mut rep = ks_two_sample_report(&a, &b);
    rep.test_name = "post_min_start_independence".into();
    rep.model_label = spec.label.clone();
    rep.param("x_a", x_a).param("x_b", x_b).param("lag", lag);
    rep.seeds.push(seeds.seed());
    Ok(rep)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn report_finish_and_summary() {
        let mut r = TestReport::new("demo", "bm");
        r.push_check(Check::at_most("a", 0.1, 0.2));
        r.push_check(Check::at_least("b", 0.9, 0.95));
        r.finish();
        assert!(!r.passed);
        assert_eq!(r.outcome, Outcome::Fail);
        assert_eq!(r.statistic, 0.1);
        assert!(r.summary_line().starts_with("FAIL demo [bm]"));
        assert!(r.summary_line().contains("!b="));
    }

    #[test]
    fn empty_report_is_not_a_pass() {
        let mut r = TestReport::new("demo", "bm");
        r.finish();
        assert!(!r.passed);
    }

    #[test]
    fn bes3_cdf_limits() {
        assert_eq!(bes3_cdf(1.0, 0.0), 0.0);
        assert!((bes3_cdf(1.0, 10.0) - 1.0).abs() < 1e-12);
        // density sqrt(2/pi) y^2 e^{-y^2/2}: numerical integral to 1
        let n = 10_000;
        let h = 1.0 / n as f64;
        let integral: f64 = (0..n)
            .map(|i| {
                let y = (i as f64 + 0.5) * h;
                (2.0 / std::f64::consts::PI).sqrt() * y * y * (-y * y / 2.0).exp() * h
            })
            .sum();
        assert!((bes3_cdf(1.0, 1.0) - integral).abs() < 1e-8);
    }

    #[test]
    fn first_passage_combination_on_deterministic_path() {
        let spec = LevyModelSpec::brownian("d", 0.3, 0.0);
        let s = IncrementSampler::new(&spec, 1.0).unwrap();
        let mut rng = SeedStream::new(0, "x").rng(0);
        // 0, 0.3, 0.6, 0.9, 1.2: tau at 1.2, sup before = 0.9 = X(tau-)
        let v = first_passage_combination(&s, 1.0, 100, &mut rng).unwrap();
        assert!((v - 1.2).abs() < 1e-12);
    }

    #[test]
    fn post_last_passage_value_examples() {
        let seg = GridPath::new(1.0, vec![0.0, 0.5, 1.5, 0.8, 2.0, 3.0], "s").unwrap();
        assert_eq!(post_last_passage_value(&seg, 1.0), Some(2.0));
        let low = GridPath::new(1.0, vec![0.0, 0.5], "s").unwrap();
        assert_eq!(post_last_passage_value(&low, 1.0), None);
    }

    #[test]
    fn window_sample_counts_epochs_and_alive_excursions() {
        let spec = LevyModelSpec::brownian("bm", 0.0, 1.0);
        let w = excursion_window_sample(&spec, 0.01, 0.1, 1.0, 50, &SeedStream::new(1, "w")).unwrap();
        assert!(w.epochs > 50);
        assert!(w.alive_values.iter().all(|&v| v > 0.0));
        assert!((w.measure(|_| 1.0) - w.measure(|v| if v > 0.0 { 1.0 } else { 0.0 })).abs() < 1e-15);
        assert_eq!(w.measure(|_| 0.0), 0.0);
    }

    #[test]
    fn heights_are_positive_and_tail_is_monotone() {
        let spec = LevyModelSpec::brownian("bm", 0.0, 1.0);
        let hs = excursion_heights(&spec, 0.01, 1.0, 100_000, 20, &SeedStream::new(2, "h")).unwrap();
        assert!(hs.heights.iter().all(|&h| h > 0.0));
        assert!(hs.tail(0.1) >= hs.tail(0.5));
        assert!(hs.tail(0.5) >= hs.tail(1.0));
    }
}
