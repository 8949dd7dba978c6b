//! Samplers for the process conditioned to stay positive.
//!
//! * rejection: condition on staying positive up to an independent exponential
//!   clock `e / epsilon`, then let `epsilon -> 0`;
//! * h-transform weights `h(X_t) / h(x0)` on unconditioned paths;
//! * the path decomposition at the (last) minimum;
//! * the entrance law from 0 when 0 is irregular upwards and there are no
//!   negative jumps;
//! * the limit started at 0: the reflected path after its last zero before a
//!   large time.

use rand::Rng;
use rand_distr::Exp1;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{ensure_positive, Error, Result};
use crate::harmonic::HarmonicEstimate;
use crate::models::{classify, IncrementSampler, JumpLaw, LevyModelSpec, ModelFamily};
use crate::path::{argmin_last, grid_steps, GridPath};
use crate::rng::SeedStream;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConditionedSampleConfig {
    pub x0: f64,
    pub epsilon: f64,
    pub dt: f64,
    /// Extra unconditioned time simulated after the clock rings.
    pub horizon: f64,
    pub max_rejections: u64,
    pub seed: u64,
}

impl ConditionedSampleConfig {
    fn validate(&self, spec: &LevyModelSpec) -> Result<()> {
        ensure_positive("epsilon", self.epsilon)?;
        ensure_positive("dt", self.dt)?;
        if !(self.horizon >= 0.0) {
            return Err(Error::InvalidParameter {
                name: "horizon",
                value: self.horizon,
                constraint: "must be >= 0".into(),
            });
        }
        if self.x0 < 0.0 || !self.x0.is_finite() {
            return Err(Error::InvalidParameter {
                name: "x0",
                value: self.x0,
                constraint: "must be finite and >= 0".into(),
            });
        }
        if self.x0 == 0.0 && classify(spec)?.regular_downwards {
            return Err(Error::OutsideValidity {
                label: spec.label.clone(),
                reason: "x0 = 0 is only allowed when 0 is irregular downwards".into(),
            });
        }
        Ok(())
    }
}

/// An accepted path: positive on the grid up to `clock_index`, unconditioned after.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConditionedPath {
    pub path: GridPath,
    /// Last grid index not after the exponential clock.
    pub clock_index: usize,
    /// Attempts used, the accepted one included.
    pub attempts: u64,
}

impl ConditionedPath {
    /// The conditioned part `[0, e/epsilon]`.
    pub fn conditioned(&self) -> GridPath {
        GridPath {
            dt: self.path.dt,
            values: self.path.values[..=self.clock_index].to_vec(),
            killed_at: None,
            label: self.path.label.clone(),
        }
    }
}

/// Run attempts from `rng` until one stays positive up to its clock.
fn attempt_until_accepted<R: Rng + ?Sized>(
    sampler: &IncrementSampler,
    cfg: &ConditionedSampleConfig,
    rng: &mut R,
    buf: &mut Vec<f64>,
) -> Result<(usize, u64)> {
    let extra = grid_steps(cfg.horizon, cfg.dt);
    for attempt in 1..=cfg.max_rejections.max(1) {
        let e: f64 = rng.sample(Exp1);
        let clock = grid_steps(e / cfg.epsilon, cfg.dt);
        buf.clear();
        let mut x = cfg.x0;
        buf.push(x);
        let mut ok = true;
        for _ in 0..clock {
            x += sampler.sample(rng);
            buf.push(x);
            if x <= 0.0 {
                ok = false;
                break;
            }
        }
        if ok {
            for _ in 0..extra {
                x += sampler.sample(rng);
                buf.push(x);
            }
            return Ok((clock, attempt));
        }
    }
    Err(Error::RejectionExhausted {
        attempts: cfg.max_rejections,
        rate: 0.0,
    })
}

/// One accepted path from replicate stream `replicate`.
pub fn sample_conditioned_rejection(
    spec: &LevyModelSpec,
    cfg: &ConditionedSampleConfig,
    replicate: u64,
) -> Result<ConditionedPath> {
    cfg.validate(spec)?;
    let sampler = IncrementSampler::new(spec, cfg.dt)?;
    let mut rng = SeedStream::new(cfg.seed, "conditioned").rng(replicate);
    let mut buf = Vec::new();
    let (clock_index, attempts) = attempt_until_accepted(&sampler, cfg, &mut rng, &mut buf)?;
    Ok(ConditionedPath {
        path: GridPath {
            dt: cfg.dt,
            values: buf,
            killed_at: None,
            label: spec.label.clone(),
        },
        clock_index,
        attempts,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RejectionStats {
    pub accepted: u64,
    pub attempts: u64,
}

impl RejectionStats {
    pub fn acceptance_rate(&self) -> f64 {
        self.accepted as f64 / self.attempts.max(1) as f64
    }
}

/// `n` accepted paths (replicates `0..n`), each reduced by `f` immediately.
pub fn sample_conditioned_many<T, F>(
    spec: &LevyModelSpec,
    cfg: &ConditionedSampleConfig,
    n: usize,
    f: F,
) -> Result<(Vec<T>, RejectionStats)>
where
    T: Send,
    F: Fn(&ConditionedPath) -> T + Sync,
{
    cfg.validate(spec)?;
    let sampler = IncrementSampler::new(spec, cfg.dt)?;
    let seeds = SeedStream::new(cfg.seed, "conditioned");
    let out: Vec<Result<(T, u64)>> = (0..n as u64)
        .into_par_iter()
        .map_init(Vec::new, |buf, i| {
            let mut rng = seeds.rng(i);
            let (clock_index, attempts) = attempt_until_accepted(&sampler, cfg, &mut rng, buf)?;
            let cp = ConditionedPath {
                path: GridPath {
                    dt: cfg.dt,
                    values: std::mem::take(buf),
                    killed_at: None,
                    label: spec.label.clone(),
                },
                clock_index,
                attempts,
            };
            let v = f(&cp);
            *buf = cp.path.values;
            Ok((v, attempts))
        })
        .collect();
    let mut values = Vec::with_capacity(n);
    let mut attempts = 0u64;
    for r in out {
        let (v, a) = r?;
        values.push(v);
        attempts += a;
    }
    Ok((
        values,
        RejectionStats {
            accepted: n as u64,
            attempts,
        },
    ))
}

/// `h(X_t) / h(x0)` if the path stays positive on the grid up to `t`, else 0.
pub fn htransform_weight(path: &GridPath, h_est: &HarmonicEstimate, x0: f64, t: f64) -> Result<f64> {
    let k = grid_steps(t, path.dt);
    let live = path.live();
    if k >= live.len() {
        return Ok(0.0);
    }
    if live[1..=k].iter().any(|&v| v <= 0.0) {
        return Ok(0.0);
    }
    let h0 = h_est.eval(x0)?;
    if h0 <= 0.0 {
        return Err(Error::Degenerate(format!("h({x0}) = {h0} is not positive")));
    }
    Ok(h_est.eval(live[k])? / h0)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DecompositionRecord {
    pub pre_min: GridPath,
    /// `X_{m + .} - U`
    pub post_min: GridPath,
    pub u: f64,
    pub m: f64,
    pub m_index: usize,
}

/// Split at the last time the minimum is attained.
pub fn decompose_at_minimum(path: &GridPath) -> DecompositionRecord {
    let live = path.live();
    let k = argmin_last(live);
    let u = live[k];
    let seg = |values: Vec<f64>| GridPath {
        dt: path.dt,
        values,
        killed_at: None,
        label: path.label.clone(),
    };
    DecompositionRecord {
        pre_min: seg(live[..k].to_vec()),
        post_min: seg(live[k..].iter().map(|v| v - u).collect()),
        u,
        m: k as f64 * path.dt,
        m_index: k,
    }
}

/// `P(U >= y) = h(x - y) / h(x)` for `0 <= y <= x`, 0 for `y > x`, 1 for `y < 0`.
pub fn minimum_law_cdf(h_est: &HarmonicEstimate, x: f64, y: f64) -> Result<f64> {
    if y > x {
        return Ok(0.0);
    }
    if y < 0.0 {
        return Ok(1.0);
    }
    let hx = h_est.eval(x)?;
    if hx <= 0.0 {
        return Err(Error::Degenerate(format!("h({x}) = {hx} is not positive")));
    }
    Ok((h_est.eval(x - y)? / hx).clamp(0.0, 1.0))
}

fn entrance_parts(spec: &LevyModelSpec) -> Result<JumpLaw> {
    match spec.family {
        ModelFamily::SpectrallyPositiveCpDrift { jump_law, .. } => {
            spec.validate()?;
            Ok(jump_law)
        }
        _ => Err(Error::OutsideValidity {
            label: spec.label.clone(),
            reason: "the entrance law sampler needs a bounded-variation model with negative drift \
                     and only positive jumps"
                .into(),
        }),
    }
}

fn sample_size_biased<R: Rng + ?Sized>(law: JumpLaw, rng: &mut R) -> f64 {
    match law {
        JumpLaw::Exponential { rate } => {
            let a: f64 = rng.sample(Exp1);
            let b: f64 = rng.sample(Exp1);
            (a + b) / rate
        }
        JumpLaw::Uniform { upper } => upper * rng.random::<f64>().sqrt(),
        JumpLaw::PointMass { at } => at,
    }
}

/// CDF of the size-biased jump law `x pi(dx) / ∫ u pi(du)`.
pub fn size_biased_cdf(law: JumpLaw, x: f64) -> f64 {
    if x <= 0.0 {
        return 0.0;
    }
    match law {
        JumpLaw::Exponential { rate } => 1.0 - (-rate * x).exp() * (1.0 + rate * x),
        JumpLaw::Uniform { upper } => (x / upper).min(1.0).powi(2),
        JumpLaw::PointMass { .. } => law.cdf(x),
    }
}

/// Initial law of the conditioned process started at 0, `h(x) pi(dx) / ∫ h dpi`.
///
/// With `h(x) = x` (no drift to `+inf`) this is the size-biased jump law;
/// when drifting to `+inf`, `h(x) = (1 - e^{-Phi x}) / Phi`.
pub fn sample_entrance_law<R: Rng + ?Sized>(spec: &LevyModelSpec, rng: &mut R) -> Result<f64> {
    let law = entrance_parts(spec)?;
    let phi = spec.downward_exit_rate();
    for _ in 0..1_000_000 {
        let x = sample_size_biased(law, rng);
        let Some(phi) = phi else { return Ok(x) };
        // h(x) / x <= 1 since h is concave with slope 1 at 0
        let accept = -(-phi * x).exp_m1() / (phi * x);
        if rng.random::<f64>() < accept {
            return Ok(x);
        }
    }
    Err(Error::RejectionExhausted {
        attempts: 1_000_000,
        rate: 0.0,
    })
}

/// CDF of the law sampled by [`sample_entrance_law`].
pub fn entrance_law_cdf(spec: &LevyModelSpec, x: f64) -> Result<f64> {
    let law = entrance_parts(spec)?;
    let Some(phi) = spec.downward_exit_rate() else {
        return Ok(size_biased_cdf(law, x));
    };
    if x <= 0.0 {
        return Ok(0.0);
    }
    let h = |u: f64| -(-phi * u).exp_m1() / phi;
    Ok(match law {
        JumpLaw::Exponential { rate } => {
            let t = rate;
            let mass = |x: f64| -(-t * x).exp_m1() - t / (t + phi) * -(-(t + phi) * x).exp_m1();
            mass(x) / (phi / (t + phi))
        }
        JumpLaw::Uniform { upper } => {
            let int = |x: f64| x - h(x);
            int(x.min(upper)) / int(upper)
        }
        JumpLaw::PointMass { at } => {
            if x >= at {
                1.0
            } else {
                0.0
            }
        }
    })
}

/// Reflected path after its last zero before `t_large`, started at 0.
/// `None` when the last zero is the final grid point (resample).
pub fn sample_post_min_limit_construction<R: Rng + ?Sized>(
    spec: &LevyModelSpec,
    t_large: f64,
    dt: f64,
    rng: &mut R,
) -> Result<Option<GridPath>> {
    if classify(spec)?.drifts_to_minus_infinity {
        return Err(Error::OutsideValidity {
            label: spec.label.clone(),
            reason: "the last-zero construction needs a model that does not drift to -inf".into(),
        });
    }
    let sampler = IncrementSampler::new(spec, dt)?;
    let steps = grid_steps(t_large, dt);
    let mut seg = vec![0.0];
    let (mut x, mut lo) = (0.0f64, 0.0f64);
    for _ in 0..steps {
        x += sampler.sample(rng);
        if x <= lo {
            lo = x;
            seg.clear();
            seg.push(0.0);
        } else {
            seg.push(x - lo);
        }
    }
    if seg.len() < 2 {
        return Ok(None);
    }
    Ok(Some(GridPath {
        dt,
        values: seg,
        killed_at: None,
        label: spec.label.clone(),
    }))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::harmonic::{closed_form_estimate, geometric_levels};
    use crate::stats::{ks_one_sample, EmpiricalDistribution, ALPHA};

    fn bm() -> LevyModelSpec {
        LevyModelSpec::brownian("bm", 0.0, 1.0)
    }

    fn cfg(x0: f64, epsilon: f64) -> ConditionedSampleConfig {
        ConditionedSampleConfig {
            x0,
            epsilon,
            dt: 0.01,
            horizon: 0.0,
            max_rejections: 100_000,
            seed: 9,
        }
    }

    #[test]
    fn decomposition_examples() {
        let p = GridPath::new(1.0, vec![2.0, 1.0, 3.0], "t").unwrap();
        let d = decompose_at_minimum(&p);
        assert_eq!(d.u, 1.0);
        assert_eq!(d.m, 1.0);
        assert_eq!(d.post_min.values, vec![0.0, 2.0]);
        assert_eq!(d.pre_min.values, vec![2.0]);
        let inc = GridPath::new(0.5, vec![1.0, 2.0, 3.0], "t").unwrap();
        let d = decompose_at_minimum(&inc);
        assert!(d.pre_min.values.is_empty());
        assert_eq!((d.u, d.m), (1.0, 0.0));
    }

    #[test]
    fn weights() {
        let est = closed_form_estimate(&bm(), &geometric_levels(-4, 3)).unwrap();
        let killed = GridPath::new(0.5, vec![1.0, -0.1, 1.0], "t").unwrap();
        assert_eq!(htransform_weight(&killed, &est, 1.0, 1.0).unwrap(), 0.0);
        let back = GridPath::new(0.5, vec![1.0, 2.0, 1.0], "t").unwrap();
        assert_eq!(htransform_weight(&back, &est, 1.0, 1.0).unwrap(), 1.0);
        let up = GridPath::new(0.5, vec![1.0, 2.0, 3.0], "t").unwrap();
        assert_eq!(htransform_weight(&up, &est, 1.0, 1.0).unwrap(), 3.0);
    }

    #[test]
    fn minimum_law_examples() {
        let est = closed_form_estimate(&bm(), &geometric_levels(-4, 2)).unwrap();
        assert_eq!(minimum_law_cdf(&est, 1.0, 0.0).unwrap(), 1.0);
        assert!((minimum_law_cdf(&est, 1.0, 0.25).unwrap() - 0.75).abs() < 1e-12);
        assert_eq!(minimum_law_cdf(&est, 1.0, 1.0).unwrap(), 0.0);
        assert_eq!(minimum_law_cdf(&est, 1.0, 1.5).unwrap(), 0.0);
    }

    #[test]
    fn acceptance_grows_with_start_and_shrinks_with_epsilon() {
        let rate = |x0: f64, eps: f64| {
            let (_, st) = sample_conditioned_many(&bm(), &cfg(x0, eps), 200, |_| ()).unwrap();
            st.acceptance_rate()
        };
        assert!(rate(2.0, 0.1) > rate(0.5, 0.1));
        assert!(rate(1.0, 0.3) > rate(1.0, 0.03));
    }

    #[test]
    fn accepted_paths_stay_positive_until_the_clock() {
        let (paths, _) = sample_conditioned_many(&bm(), &cfg(0.5, 0.1), 50, |cp| cp.clone()).unwrap();
        for cp in paths {
            assert!(cp.conditioned().values.iter().all(|&v| v > 0.0));
            assert_eq!(cp.path.values[0], 0.5);
        }
    }

    #[test]
    fn single_sample_matches_batch_replicate() {
        let c = cfg(1.0, 0.1);
        let one = sample_conditioned_rejection(&bm(), &c, 3).unwrap();
        let (batch, _) = sample_conditioned_many(&bm(), &c, 4, |cp| cp.clone()).unwrap();
        assert_eq!(one, batch[3]);
    }

    #[test]
    fn zero_start_rejected_when_regular_downwards() {
        assert!(matches!(
            sample_conditioned_rejection(&bm(), &cfg(0.0, 0.1), 0),
            Err(Error::OutsideValidity { .. })
        ));
    }

    #[test]
    fn exhausted_rejections_are_reported() {
        let mut c = cfg(0.01, 1e-4);
        c.max_rejections = 3;
        c.dt = 0.1;
        assert!(matches!(
            sample_conditioned_rejection(&bm(), &c, 0),
            Err(Error::RejectionExhausted { .. })
        ));
    }

    #[test]
    fn entrance_law_shapes() {
        let mut r = SeedStream::new(4, "entrance").rng(0);
        for (law, cdf) in [
            (JumpLaw::Exponential { rate: 1.0 }, Box::new(|x: f64| 1.0 - (-x).exp() * (1.0 + x)) as Box<dyn Fn(f64) -> f64>),
            (JumpLaw::Uniform { upper: 1.0 }, Box::new(|x: f64| x.clamp(0.0, 1.0).powi(2))),
        ] {
            // oscillating: mean jump 1 and drift -1
            let drift = -law.mean();
            let spec = LevyModelSpec::spectrally_positive("osc", drift, 1.0, law);
            let xs: Vec<f64> = (0..5000).map(|_| sample_entrance_law(&spec, &mut r).unwrap()).collect();
            assert!(ks_one_sample(&EmpiricalDistribution::new(xs), cdf, ALPHA).passed);
        }
        let pm = LevyModelSpec::spectrally_positive("pm", -1.0, 1.0, JumpLaw::PointMass { at: 0.7 });
        assert_eq!(sample_entrance_law(&pm, &mut r).unwrap(), 0.7);
        assert!(sample_entrance_law(&bm(), &mut r).is_err());
    }

    #[test]
    fn entrance_law_when_drifting_up_is_h_weighted() {
        let spec = LevyModelSpec::spectrally_positive("up", -0.5, 1.0, JumpLaw::Exponential { rate: 1.0 });
        // h(x) = 1 - e^{-x}: CDF (1 - e^{-x})^2
        for x in [0.3, 1.0, 2.5] {
            let c = entrance_law_cdf(&spec, x).unwrap();
            assert!((c - (1.0 - (-x as f64).exp()).powi(2)).abs() < 1e-12);
        }
        let mut r = SeedStream::new(5, "up").rng(0);
        let xs: Vec<f64> = (0..5000).map(|_| sample_entrance_law(&spec, &mut r).unwrap()).collect();
        let res = ks_one_sample(&EmpiricalDistribution::new(xs), |x| entrance_law_cdf(&spec, x).unwrap(), ALPHA);
        assert!(res.passed, "{res:?}");
    }

    #[test]
    fn limit_construction_segment_starts_at_zero() {
        let mut r = SeedStream::new(6, "lim").rng(0);
        let seg = sample_post_min_limit_construction(&bm(), 10.0, 0.01, &mut r).unwrap().unwrap();
        assert_eq!(seg.values[0], 0.0);
        assert!(seg.values[1..].iter().all(|&v| v > 0.0));
        let down = LevyModelSpec::brownian("d", -1.0, 1.0);
        assert!(sample_post_min_limit_construction(&down, 10.0, 0.01, &mut r).is_err());
    }
}
