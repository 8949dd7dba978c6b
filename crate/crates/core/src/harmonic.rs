//! The harmonic function `h(x) = E ∫ 1{inf_{s<=t} X_s >= -x} dL_t` of the
//! process killed below 0, where `L` is the local time at the running
//! infimum.
//!
//! On a grid skeleton `L` is the counting measure of new-minimum epochs
//! (epoch 0 included), so `h(0) = 1` and `h` is only defined up to the
//! dt-dependent normalisation of that counting. Everything downstream uses
//! `h` through ratios or through one fitted constant.

use std::path::Path;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{ensure_positive, Error, Result};
use crate::models::{classify, IncrementSampler, LevyModelSpec, ModelFamily};
use crate::path::grid_steps;
use crate::rng::SeedStream;
use crate::verify::{Check, TestReport};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum HarmonicMethod {
    ClosedForm,
    LadderCounting,
    ExitRatio,
}

impl HarmonicMethod {
    pub fn as_str(self) -> &'static str {
        match self {
            HarmonicMethod::ClosedForm => "closed_form",
            HarmonicMethod::LadderCounting => "ladder_counting",
            HarmonicMethod::ExitRatio => "exit_ratio",
        }
    }

    fn parse(s: &str) -> Option<Self> {
        match s {
            "closed_form" => Some(HarmonicMethod::ClosedForm),
            "ladder_counting" => Some(HarmonicMethod::LadderCounting),
            "exit_ratio" => Some(HarmonicMethod::ExitRatio),
            _ => None,
        }
    }
}

/// `h` tabulated on increasing levels, linearly interpolated in between.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HarmonicEstimate {
    pub levels: Vec<f64>,
    pub values: Vec<f64>,
    pub stderr: Vec<f64>,
    pub method: HarmonicMethod,
    pub normalization_note: String,
}

/// `(index, weight)` of the interpolation cell containing `x`.
fn locate(levels: &[f64], x: f64) -> (usize, f64) {
    let k = levels.partition_point(|&l| l <= x);
    if k == 0 {
        return (0, 0.0);
    }
    if k >= levels.len() {
        return (levels.len() - 1, 0.0);
    }
    let (a, b) = (levels[k - 1], levels[k]);
    (k - 1, (x - a) / (b - a))
}

impl HarmonicEstimate {
    pub fn max_level(&self) -> f64 {
        *self.levels.last().expect("nonempty levels")
    }

    /// `h(x)`; 0 below 0 (the killed region), an error above the last level.
    pub fn eval(&self, x: f64) -> Result<f64> {
        self.eval_with_se(x).map(|(v, _)| v)
    }

    pub fn eval_with_se(&self, x: f64) -> Result<(f64, f64)> {
        if x < 0.0 {
            return Ok((0.0, 0.0));
        }
        let max = self.max_level();
        if x > max * (1.0 + 1e-12) || x.is_nan() {
            return Err(Error::HarmonicRange { level: x, max });
        }
        if x < self.levels[0] {
            // below the first tabulated level: interpolate towards h(0) = values[0]
            return Ok((self.values[0], self.stderr[0]));
        }
        let (i, w) = locate(&self.levels, x);
        if w == 0.0 {
            return Ok((self.values[i], self.stderr[i]));
        }
        let v = (1.0 - w) * self.values[i] + w * self.values[i + 1];
        let s = (1.0 - w) * self.stderr[i] + w * self.stderr[i + 1];
        Ok((v, s))
    }

    /// Value beyond the table by a power law fitted to the last two levels.
    fn eval_extrapolated(&self, x: f64) -> f64 {
        let n = self.levels.len();
        let max = self.max_level();
        if x <= max {
            return self.eval(x).unwrap_or(0.0);
        }
        if n < 2 || self.levels[n - 2] <= 0.0 || self.values[n - 2] <= 0.0 {
            return self.values[n - 1] * x / max;
        }
        let p = (self.values[n - 1] / self.values[n - 2]).ln() / (max / self.levels[n - 2]).ln();
        self.values[n - 1] * (x / max).powf(p.clamp(0.0, 1.5))
    }

    /// `h(x) / h(y)` with a first-order standard error (levels treated as independent).
    pub fn ratio(&self, x: f64, y: f64) -> Result<(f64, f64)> {
        let (hx, sx) = self.eval_with_se(x)?;
        let (hy, sy) = self.eval_with_se(y)?;
        if hy <= 0.0 {
            return Err(Error::Degenerate(format!("h({y}) = {hy} is not positive")));
        }
        let r = hx / hy;
        let rel = if hx > 0.0 {
            ((sx / hx).powi(2) + (sy / hy).powi(2)).sqrt()
        } else {
            sy / hy
        };
        Ok((r, r * rel))
    }

    pub fn scaled(&self, c: f64) -> Self {
        let mut out = self.clone();
        out.values.iter_mut().for_each(|v| *v *= c);
        out.stderr.iter_mut().for_each(|v| *v *= c.abs());
        out
    }

    /// Largest violation of monotonicity, in units of combined stderr (<= 0 if monotone).
    pub fn monotonicity_violation(&self) -> f64 {
        self.values
            .windows(2)
            .zip(self.stderr.windows(2))
            .map(|(v, s)| {
                let se = (s[0] * s[0] + s[1] * s[1]).sqrt();
                let drop = v[0] - v[1];
                if se > 0.0 {
                    drop / se
                } else if drop > 0.0 {
                    f64::INFINITY
                } else {
                    0.0
                }
            })
            .fold(f64::NEG_INFINITY, f64::max)
    }

    pub fn write_csv(&self, path: &Path) -> Result<()> {
        let mut w = csv::Writer::from_path(path)?;
        w.write_record(["level", "value", "stderr", "method"])?;
        for i in 0..self.levels.len() {
            w.write_record([
                self.levels[i].to_string(),
                self.values[i].to_string(),
                self.stderr[i].to_string(),
                self.method.as_str().to_string(),
            ])?;
        }
        w.flush()?;
        Ok(())
    }

    pub fn read_csv(path: &Path) -> Result<Self> {
        let mut r = csv::Reader::from_path(path)?;
        let mut est = HarmonicEstimate {
            levels: vec![],
            values: vec![],
            stderr: vec![],
            method: HarmonicMethod::LadderCounting,
            normalization_note: format!("loaded from {}", path.display()),
        };
        for rec in r.records() {
            let rec = rec?;
            let num = |i: usize| -> Result<f64> {
                rec.get(i)
                    .and_then(|s| s.trim().parse().ok())
                    .ok_or_else(|| Error::Config(format!("bad number in column {i} of {}", path.display())))
            };
            est.levels.push(num(0)?);
            est.values.push(num(1)?);
            est.stderr.push(num(2)?);
            if let Some(m) = rec.get(3).and_then(HarmonicMethod::parse) {
                est.method = m;
            }
        }
        if est.levels.is_empty() || est.levels.windows(2).any(|w| w[1] <= w[0]) {
            return Err(Error::Config(format!(
                "{}: levels must be nonempty and strictly increasing",
                path.display()
            )));
        }
        Ok(est)
    }
}

/// Geometric level grid `0, base^-k_min, ..., base^k_max`.
pub fn geometric_levels(min_exp: i32, max_exp: i32) -> Vec<f64> {
    std::iter::once(0.0)
        .chain((min_exp..=max_exp).map(|k| 2f64.powi(k)))
        .collect()
}

/// Closed form of `h` where one is known, in the normalisation `h(x) ~ x` (or
/// `x^{alpha/2}` for symmetric stable laws).
///
/// * no negative jumps and no upward drift to `+inf`: `h(x) = x`;
/// * no negative jumps, drifting to `+inf`: `h(x) = (1 - e^{-Phi x}) / Phi`
///   where `e^{-Phi x}` is the probability of ever going below `-x`;
/// * symmetric stable: `h(x) = x^{alpha/2}` up to a constant.
pub fn h_closed_form(spec: &LevyModelSpec, x: f64) -> Option<f64> {
    if x < 0.0 || spec.validate().is_err() {
        return None;
    }
    match spec.family {
        ModelFamily::BrownianWithDrift { drift, sigma } => {
            if drift > 0.0 && sigma > 0.0 {
                let phi = 2.0 * drift / (sigma * sigma);
                Some(-(-phi * x).exp_m1() / phi)
            } else if drift > 0.0 {
                // pure upward drift never goes below its start
                None
            } else {
                Some(x)
            }
        }
        ModelFamily::Stable { alpha, beta, .. } => {
            if alpha == 2.0 {
                Some(x)
            } else if beta == 0.0 {
                Some(x.powf(alpha / 2.0))
            } else if beta == 1.0 && alpha > 1.0 {
                Some(x)
            } else {
                None
            }
        }
        ModelFamily::SpectrallyPositiveCpDrift { .. } => match spec.downward_exit_rate() {
            Some(phi) => Some(-(-phi * x).exp_m1() / phi),
            None => Some(x),
        },
        ModelFamily::SpectrallyNegativeBmCp { .. } => None,
    }
}

/// Tabulate [`h_closed_form`] on `levels`, if registered for this model.
pub fn closed_form_estimate(spec: &LevyModelSpec, levels: &[f64]) -> Option<HarmonicEstimate> {
    let values: Option<Vec<f64>> = levels.iter().map(|&x| h_closed_form(spec, x)).collect();
    Some(HarmonicEstimate {
        levels: levels.to_vec(),
        values: values?,
        stderr: vec![0.0; levels.len()],
        method: HarmonicMethod::ClosedForm,
        normalization_note: "continuum closed form, h(x) ~ x (x^{alpha/2} for symmetric stable)".into(),
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LadderConfig {
    pub dt: f64,
    pub n_paths: usize,
    pub horizon: f64,
    /// Double the horizon while the tail diagnostic exceeds its threshold, up to this.
    pub max_horizon: Option<f64>,
    /// Add the Markov-property continuation for paths still alive at the horizon.
    pub tail_correction: bool,
}

impl LadderConfig {
    pub fn new(dt: f64, n_paths: usize, horizon: f64) -> Self {
        Self {
            dt,
            n_paths,
            horizon,
            max_horizon: None,
            tail_correction: true,
        }
    }
}

/// Fraction of paths allowed to set a counted new minimum in the last 10% of the horizon.
pub const TAIL_THRESHOLD: f64 = 1e-3;

struct LadderPath {
    counts: Vec<f64>,
    depth: f64,
    reflected: f64,
    late_epoch: bool,
}

fn ladder_path(
    sampler: &IncrementSampler,
    levels: &[f64],
    steps: usize,
    seeds: &SeedStream,
    replicate: u64,
) -> LadderPath {
    let max_level = *levels.last().unwrap();
    let late = steps - steps / 10;
    let mut rng = seeds.rng(replicate);
    let mut hist = vec![0u32; levels.len()];
    hist[0] = 1;
    let (mut x, mut lo) = (0.0f64, 0.0f64);
    let mut late_epoch = false;
    for k in 1..=steps {
        x += sampler.sample(&mut rng);
        if x <= lo {
            lo = x;
            let d = -lo;
            if d > max_level {
                break;
            }
            hist[levels.partition_point(|&l| l < d)] += 1;
            if k > late {
                late_epoch = true;
            }
        }
    }
    let mut acc = 0.0;
    let counts = hist
        .iter()
        .map(|&c| {
            acc += f64::from(c);
            acc
        })
        .collect();
    LadderPath {
        counts,
        depth: -lo,
        reflected: x - lo,
        late_epoch,
    }
}

/// Ladder (counting local time) estimator of `h` on `levels`.
///
/// Each path is run until its depth `-inf X` exceeds the last level or the
/// horizon is reached. For a path still alive at the horizon with depth `d`
/// and reflected value `r`, the epochs still to come with depth `<= x` number
/// `h(r + x - d) - h(r)` in expectation (Markov property of the pair), so the
/// truncated counts are completed by iterating that relation to a fixed point.
pub fn estimate_h_ladder(
    spec: &LevyModelSpec,
    levels: &[f64],
    cfg: &LadderConfig,
    seeds: &SeedStream,
) -> Result<HarmonicEstimate> {
    ensure_positive("dt", cfg.dt)?;
    ensure_positive("horizon", cfg.horizon)?;
    if levels.is_empty() || levels[0] != 0.0 || levels.windows(2).any(|w| w[1] <= w[0]) {
        return Err(Error::Config(
            "ladder levels must start at 0 and be strictly increasing".into(),
        ));
    }
    if cfg.n_paths < 2 {
        return Err(Error::Config("ladder estimator needs at least 2 paths".into()));
    }
    let sampler = IncrementSampler::new(spec, cfg.dt)?;
    let mut horizon = cfg.horizon;
    let (paths, tail_fraction) = loop {
        let steps = grid_steps(horizon, cfg.dt).max(1);
        let paths: Vec<LadderPath> = (0..cfg.n_paths as u64)
            .into_par_iter()
            .map(|p| ladder_path(&sampler, levels, steps, seeds, p))
            .collect();
        let late = paths.iter().filter(|p| p.late_epoch).count() as f64 / paths.len() as f64;
        match cfg.max_horizon {
            Some(max) if late > TAIL_THRESHOLD && horizon * 2.0 <= max => horizon *= 2.0,
            _ => break (paths, late),
        }
    };
    if tail_fraction > TAIL_THRESHOLD && !cfg.tail_correction {
        log::warn!(
            "{}: {:.2}% of ladder paths set a new minimum in the last 10% of horizon {horizon}",
            spec.label,
            100.0 * tail_fraction
        );
    }

    let n = paths.len() as f64;
    let raw_mean: Vec<f64> = (0..levels.len())
        .map(|i| paths.iter().map(|p| p.counts[i]).sum::<f64>() / n)
        .collect();
    let mut est = HarmonicEstimate {
        levels: levels.to_vec(),
        values: raw_mean,
        stderr: vec![0.0; levels.len()],
        method: HarmonicMethod::LadderCounting,
        normalization_note: String::new(),
    };
    let completed = |est: &HarmonicEstimate, p: &LadderPath, i: usize| -> f64 {
        let x = levels[i];
        if cfg.tail_correction && p.depth < x {
            p.counts[i] + est.eval_extrapolated(p.reflected + x - p.depth)
                - est.eval_extrapolated(p.reflected)
        } else {
            p.counts[i]
        }
    };
    let alive_at_top = paths.iter().filter(|p| p.depth < est.max_level()).count();
    if cfg.tail_correction && alive_at_top > 0 {
        for _ in 0..500 {
            let next: Vec<f64> = (0..levels.len())
                .map(|i| paths.iter().map(|p| completed(&est, p, i)).sum::<f64>() / n)
                .collect();
            let change = next
                .iter()
                .zip(&est.values)
                .map(|(a, b)| (a - b).abs() / b.abs().max(1.0))
                .fold(0.0, f64::max);
            est.values = next;
            if change < 1e-10 {
                break;
            }
        }
    }
    for i in 0..levels.len() {
        let m = est.values[i];
        let var = paths
            .iter()
            .map(|p| (completed(&est, p, i) - m).powi(2))
            .sum::<f64>()
            / (n - 1.0);
        est.stderr[i] = (var / n).sqrt();
    }
    est.normalization_note = format!(
        "counting local time on a dt={} skeleton, epoch 0 counted (h(0)=1); horizon={}, \
         alive at top level={:.4}, tail_correction={}, late-epoch fraction={:.5}",
        cfg.dt,
        horizon,
        alive_at_top as f64 / n,
        cfg.tail_correction,
        tail_fraction
    );
    Ok(est)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ExitRatio {
    pub ratio: f64,
    pub stderr: f64,
    pub p_x: f64,
    pub p_y: f64,
    pub n_paths: usize,
    /// Paths that hit the step cap before leaving the strip (counted as failures).
    pub unresolved: usize,
}

/// Empirical `P_x(reach [barrier, inf) before (-inf, 0))`.
pub fn exit_probability(
    spec: &LevyModelSpec,
    x: f64,
    barrier: f64,
    dt: f64,
    n_paths: usize,
    max_steps: usize,
    seeds: &SeedStream,
) -> Result<(f64, usize)> {
    let sampler = IncrementSampler::new(spec, dt)?;
    let (hits, unresolved) = (0..n_paths as u64)
        .into_par_iter()
        .map(|p| {
            let mut rng = seeds.rng(p);
            let mut v = x;
            for _ in 0..max_steps {
                v += sampler.sample(&mut rng);
                if v < 0.0 {
                    return (0usize, 0usize);
                }
                if v >= barrier {
                    return (1, 0);
                }
            }
            (0, 1)
        })
        .reduce(|| (0, 0), |a, b| (a.0 + b.0, a.1 + b.1));
    Ok((hits as f64 / n_paths as f64, unresolved))
}

/// `h(x) / h(y)` as the ratio of two-barrier exit probabilities.
#[allow(clippy::too_many_arguments)]
pub fn estimate_h_exit_ratio(
    spec: &LevyModelSpec,
    x: f64,
    y: f64,
    barrier: f64,
    dt: f64,
    n_paths: usize,
    max_steps: usize,
    seeds: &SeedStream,
) -> Result<ExitRatio> {
    ensure_positive("x", x)?;
    ensure_positive("y", y)?;
    if classify(spec)?.drifts_to_minus_infinity {
        return Err(Error::OutsideValidity {
            label: spec.label.clone(),
            reason: "the exit-ratio characterisation needs limsup X = +inf".into(),
        });
    }
    if barrier < 10.0 * x.max(y) {
        return Err(Error::InvalidParameter {
            name: "barrier",
            value: barrier,
            constraint: format!("must be >= 10 * max(x, y) = {}", 10.0 * x.max(y)),
        });
    }
    let (p_x, ux) = exit_probability(spec, x, barrier, dt, n_paths, max_steps, &seeds.child("x"))?;
    let (p_y, uy) = if x == y {
        (p_x, ux)
    } else {
        exit_probability(spec, y, barrier, dt, n_paths, max_steps, &seeds.child("y"))?
    };
    if p_x == 0.0 || p_y == 0.0 {
        return Err(Error::Degenerate(format!(
            "empty exit count (p_x={p_x}, p_y={p_y}); raise n_paths or lower the barrier"
        )));
    }
    let n = n_paths as f64;
    let ratio = p_x / p_y;
    let stderr = if x == y {
        0.0
    } else {
        ratio * ((1.0 - p_x) / (n * p_x) + (1.0 - p_y) / (n * p_y)).sqrt()
    };
    Ok(ExitRatio {
        ratio,
        stderr,
        p_x,
        p_y,
        n_paths,
        unresolved: ux + uy,
    })
}

/// Monte Carlo `E_x[h(X_t); X_s >= 0 on the grid up to t]` for `n_paths` paths,
/// returned as `(mean, stderr)`.
pub fn killed_expectation(
    spec: &LevyModelSpec,
    h_est: &HarmonicEstimate,
    x: f64,
    t: f64,
    dt: f64,
    n_paths: usize,
    seeds: &SeedStream,
) -> Result<(f64, f64)> {
    let sampler = IncrementSampler::new(spec, dt)?;
    let steps = grid_steps(t, dt);
    let vals: Vec<Result<f64>> = (0..n_paths as u64)
        .into_par_iter()
        .map(|p| {
            let mut rng = seeds.rng(p);
            let mut v = x;
            for _ in 0..steps {
                v += sampler.sample(&mut rng);
                if v < 0.0 {
                    return Ok(0.0);
                }
            }
            h_est.eval(v)
        })
        .collect();
    let vals: Vec<f64> = vals.into_iter().collect::<Result<_>>()?;
    Ok(crate::stats::mean_se(&vals))
}

/// Invariance (equality) or excessiveness (one-sided bound) of `h` for the
/// killed semigroup at `(x, t)`.
#[allow(clippy::too_many_arguments)]
pub fn check_excessive_invariant(
    spec: &LevyModelSpec,
    h_est: &HarmonicEstimate,
    x: f64,
    t: f64,
    dt: f64,
    n_paths: usize,
    seeds: &SeedStream,
) -> Result<TestReport> {
    ensure_positive("x", x)?;
    let flags = classify(spec)?;
    let (hx, hx_se) = h_est.eval_with_se(x)?;
    let (mean, mc_se) = if t <= 0.0 {
        (hx, 0.0)
    } else {
        killed_expectation(spec, h_est, x, t, dt, n_paths, seeds)?
    };
    let se = (mc_se * mc_se + hx_se * hx_se).sqrt();
    let z = if se > 0.0 { (mean - hx) / se } else { 0.0 };
    let excessive = flags.drifts_to_minus_infinity;
    let (statistic, critical, passed, form) = if excessive {
        (z, 2.0, z <= 2.0, "E_x[h(X_t); t<zeta] <= h(x) + 2 se")
    } else {
        (z.abs(), 3.0, z.abs() <= 3.0 || mean == hx, "|E_x[h(X_t); t<zeta] - h(x)| <= 3 se")
    };
    let mut report = TestReport::new("excessive_invariant", &spec.label);
    report.param("x", x).param("t", t).param("dt", dt);
    report.n_samples = n_paths as u64;
    report.seeds.push(seeds.seed());
    report.push_check(Check::at_most(form, statistic, critical));
    report.note(format!(
        "mean={mean:.6} h(x)={hx:.6} mc_se={mc_se:.3e} h_se={hx_se:.3e} ({})",
        if excessive { "excessive case" } else { "invariant case" }
    ));
    report.finish_with(statistic, critical, passed);
    Ok(report)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::models::JumpLaw;

    fn bm() -> LevyModelSpec {
        LevyModelSpec::brownian("bm", 0.0, 1.0)
    }

    #[test]
    fn closed_forms() {
        let cp = LevyModelSpec::spectrally_positive("cp", -1.0, 1.0, JumpLaw::Exponential { rate: 1.0 });
        assert_eq!(h_closed_form(&cp, 3.0), Some(3.0));
        assert_eq!(h_closed_form(&bm(), 0.0), Some(0.0));
        let up = LevyModelSpec::spectrally_positive("up", -0.5, 1.0, JumpLaw::Exponential { rate: 1.0 });
        let h = h_closed_form(&up, 2.0).unwrap();
        assert!((h - (1.0 - (-2.0f64).exp())).abs() < 1e-9);
        let cauchy = LevyModelSpec::stable("c", 1.0, 0.0, 1.0);
        let r = h_closed_form(&cauchy, 2.0).unwrap() / h_closed_form(&cauchy, 1.0).unwrap();
        assert!((r - 2f64.sqrt()).abs() < 1e-12);
        let sn = LevyModelSpec::spectrally_negative("sn", 0.0, 1.0, 1.0, JumpLaw::PointMass { at: 1.0 });
        assert_eq!(h_closed_form(&sn, 1.0), None);
    }

    #[test]
    fn interpolation_and_range() {
        let est = HarmonicEstimate {
            levels: vec![0.0, 1.0, 2.0],
            values: vec![1.0, 3.0, 4.0],
            stderr: vec![0.0, 0.1, 0.2],
            method: HarmonicMethod::LadderCounting,
            normalization_note: String::new(),
        };
        assert_eq!(est.eval(0.5).unwrap(), 2.0);
        assert_eq!(est.eval(-1.0).unwrap(), 0.0);
        assert_eq!(est.eval(2.0).unwrap(), 4.0);
        assert!(matches!(est.eval(2.5), Err(Error::HarmonicRange { .. })));
        assert!(est.monotonicity_violation() <= 0.0);
        let (r, _) = est.scaled(7.0).ratio(1.0, 2.0).unwrap();
        assert!((r - 0.75).abs() < 1e-12);
    }

    #[test]
    fn csv_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let f = dir.path().join("h.csv");
        let est = closed_form_estimate(&bm(), &geometric_levels(-2, 1)).unwrap();
        est.write_csv(&f).unwrap();
        let back = HarmonicEstimate::read_csv(&f).unwrap();
        assert_eq!(back.levels, est.levels);
        assert_eq!(back.values, est.values);
        assert_eq!(back.method, HarmonicMethod::ClosedForm);
    }

    #[test]
    fn ladder_level_zero_is_one() {
        let est = estimate_h_ladder(
            &bm(),
            &[0.0, 0.5, 1.0],
            &LadderConfig::new(0.01, 200, 2.0),
            &SeedStream::new(1, "ladder"),
        )
        .unwrap();
        assert_eq!(est.values[0], 1.0);
        assert_eq!(est.stderr[0], 0.0);
        assert!(est.values[1] > 1.0 && est.values[2] > est.values[1]);
    }

    #[test]
    fn ladder_is_reproducible() {
        let cfg = LadderConfig::new(0.01, 100, 1.0);
        let s = SeedStream::new(3, "ladder");
        let a = estimate_h_ladder(&bm(), &[0.0, 1.0], &cfg, &s).unwrap();
        let b = estimate_h_ladder(&bm(), &[0.0, 1.0], &cfg, &s).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn pure_drift_down_counts_every_step() {
        // every step is a new minimum: h(x) = 1 + floor(x / (|mu| dt))
        let spec = LevyModelSpec::brownian("d", -1.0, 0.0);
        let est = estimate_h_ladder(
            &spec,
            &[0.0, 0.25, 1.0],
            &LadderConfig::new(0.1, 10, 5.0),
            &SeedStream::new(0, "d"),
        )
        .unwrap();
        assert!((est.values[1] - 3.0).abs() < 1e-9, "{:?}", est.values);
        assert!((est.values[2] - 11.0).abs() < 1e-9 || (est.values[2] - 10.0).abs() < 1e-9);
    }

    #[test]
    fn exit_ratio_of_equal_starts_is_one() {
        let r = estimate_h_exit_ratio(&bm(), 1.0, 1.0, 10.0, 0.01, 500, 1_000_000, &SeedStream::new(2, "e"))
            .unwrap();
        assert_eq!(r.ratio, 1.0);
    }

    #[test]
    fn exit_ratio_rejects_bad_inputs() {
        let s = SeedStream::new(2, "e");
        assert!(estimate_h_exit_ratio(&bm(), 1.0, 2.0, 5.0, 0.01, 10, 10, &s).is_err());
        let down = LevyModelSpec::brownian("d", -1.0, 1.0);
        assert!(matches!(
            estimate_h_exit_ratio(&down, 1.0, 2.0, 20.0, 0.01, 10, 10, &s),
            Err(Error::OutsideValidity { .. })
        ));
    }

    #[test]
    fn invariance_check_at_time_zero_is_exact() {
        let est = closed_form_estimate(&bm(), &geometric_levels(-3, 3)).unwrap();
        let rep = check_excessive_invariant(&bm(), &est, 1.0, 0.0, 0.01, 10, &SeedStream::new(0, "t0")).unwrap();
        assert!(rep.passed);
        assert_eq!(rep.statistic, 0.0);
    }
}
