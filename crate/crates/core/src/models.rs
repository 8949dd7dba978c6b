//! Lévy model families, exact increment sampling and the fluctuation-theory
//! classification used downstream.
//!
//! Four families are implemented:
//!
//! * Brownian motion with drift,
//! * strictly/weakly stable processes (Chambers–Mallows–Stuck, 1-parameterisation),
//! * a negative drift plus positive compound Poisson jumps (spectrally positive,
//!   bounded variation),
//! * Brownian motion with drift plus negative compound Poisson jumps (spectrally negative).
//!
//! Increments are exact draws of `X_{t+dt} - X_t`; nothing is Euler-approximated.

use std::f64::consts::{FRAC_PI_2, PI};

use rand::Rng;
use rand_distr::{Exp1, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Law of the jump magnitudes of a compound Poisson component. Magnitudes are
/// positive; the sign is fixed by the family.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum JumpLaw {
    Exponential { rate: f64 },
    Uniform { upper: f64 },
    PointMass { at: f64 },
}

impl JumpLaw {
    fn validate(&self) -> std::result::Result<(), String> {
        let (name, v) = match *self {
            JumpLaw::Exponential { rate } => ("rate", rate),
            JumpLaw::Uniform { upper } => ("upper", upper),
            JumpLaw::PointMass { at } => ("at", at),
        };
        if v.is_finite() && v > 0.0 {
            Ok(())
        } else {
            Err(format!("jump law parameter `{name}` must be finite and > 0, got {v}"))
        }
    }

    pub fn mean(&self) -> f64 {
        match *self {
            JumpLaw::Exponential { rate } => 1.0 / rate,
            JumpLaw::Uniform { upper } => upper / 2.0,
            JumpLaw::PointMass { at } => at,
        }
    }

    /// `E exp(-lambda J)`.
    pub fn laplace(&self, lambda: f64) -> f64 {
        match *self {
            JumpLaw::Exponential { rate } => rate / (rate + lambda),
            JumpLaw::Uniform { upper } => {
                let z = lambda * upper;
                if z.abs() < 1e-8 {
                    1.0 - z / 2.0
                } else {
                    -(-z).exp_m1() / z
                }
            }
            JumpLaw::PointMass { at } => (-lambda * at).exp(),
        }
    }

    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> f64 {
        match *self {
            JumpLaw::Exponential { rate } => {
                let e: f64 = rng.sample(Exp1);
                e / rate
            }
            JumpLaw::Uniform { upper } => upper * rng.random::<f64>(),
            JumpLaw::PointMass { at } => at,
        }
    }

    pub fn cdf(&self, x: f64) -> f64 {
        if x < 0.0 {
            return 0.0;
        }
        match *self {
            JumpLaw::Exponential { rate } => -(-rate * x).exp_m1(),
            JumpLaw::Uniform { upper } => (x / upper).min(1.0),
            JumpLaw::PointMass { at } => {
                if x >= at {
                    1.0
                } else {
                    0.0
                }
            }
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "family", rename_all = "snake_case")]
pub enum ModelFamily {
    BrownianWithDrift {
        drift: f64,
        sigma: f64,
    },
    Stable {
        alpha: f64,
        beta: f64,
        scale: f64,
    },
    /// Negative drift and positive jumps.
    SpectrallyPositiveCpDrift {
        drift: f64,
        jump_rate: f64,
        jump_law: JumpLaw,
    },
    /// Brownian part and negative jumps of magnitude drawn from `jump_law`.
    SpectrallyNegativeBmCp {
        drift: f64,
        sigma: f64,
        jump_rate: f64,
        jump_law: JumpLaw,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LevyModelSpec {
    pub label: String,
    #[serde(flatten)]
    pub family: ModelFamily,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct RegularityFlags {
    pub regular_upwards: bool,
    pub regular_downwards: bool,
    pub creeps_upwards: bool,
    pub drifts_to_minus_infinity: bool,
    pub oscillates_or_drifts_up: bool,
}

impl LevyModelSpec {
    pub fn new(label: impl Into<String>, family: ModelFamily) -> Self {
        Self {
            label: label.into(),
            family,
        }
    }

    pub fn brownian(label: impl Into<String>, drift: f64, sigma: f64) -> Self {
        Self::new(label, ModelFamily::BrownianWithDrift { drift, sigma })
    }

    pub fn stable(label: impl Into<String>, alpha: f64, beta: f64, scale: f64) -> Self {
        Self::new(label, ModelFamily::Stable { alpha, beta, scale })
    }

    pub fn spectrally_positive(
        label: impl Into<String>,
        drift: f64,
        jump_rate: f64,
        jump_law: JumpLaw,
    ) -> Self {
        Self::new(
            label,
            ModelFamily::SpectrallyPositiveCpDrift {
                drift,
                jump_rate,
                jump_law,
            },
        )
    }

    pub fn spectrally_negative(
        label: impl Into<String>,
        drift: f64,
        sigma: f64,
        jump_rate: f64,
        jump_law: JumpLaw,
    ) -> Self {
        Self::new(
            label,
            ModelFamily::SpectrallyNegativeBmCp {
                drift,
                sigma,
                jump_rate,
                jump_law,
            },
        )
    }

    fn invalid(&self, reason: impl Into<String>) -> Error {
        Error::InvalidModel {
            label: self.label.clone(),
            reason: reason.into(),
        }
    }

    pub fn validate(&self) -> Result<()> {
        let finite = |name: &str, v: f64| {
            if v.is_finite() {
                Ok(())
            } else {
                Err(self.invalid(format!("`{name}` must be finite")))
            }
        };
        match self.family {
            ModelFamily::BrownianWithDrift { drift, sigma } => {
                finite("drift", drift)?;
                finite("sigma", sigma)?;
                if sigma < 0.0 {
                    return Err(self.invalid("sigma must be >= 0"));
                }
                if sigma == 0.0 && drift == 0.0 {
                    return Err(self.invalid("the zero process is degenerate"));
                }
            }
            ModelFamily::Stable { alpha, beta, scale } => {
                finite("alpha", alpha)?;
                finite("beta", beta)?;
                finite("scale", scale)?;
                if !(alpha > 0.0 && alpha <= 2.0) {
                    return Err(self.invalid("alpha must lie in (0, 2]"));
                }
                if !(-1.0..=1.0).contains(&beta) {
                    return Err(self.invalid("beta must lie in [-1, 1]"));
                }
                if scale <= 0.0 {
                    return Err(self.invalid("scale must be > 0"));
                }
                if alpha <= 1.0 && beta.abs() == 1.0 {
                    return Err(self.invalid(
                        "alpha <= 1 with |beta| = 1 (one-sided or monotone stable) is not supported",
                    ));
                }
            }
            ModelFamily::SpectrallyPositiveCpDrift {
                drift,
                jump_rate,
                jump_law,
            } => {
                finite("drift", drift)?;
                finite("jump_rate", jump_rate)?;
                if drift >= 0.0 {
                    return Err(self.invalid("drift must be < 0"));
                }
                if jump_rate <= 0.0 {
                    return Err(self.invalid("jump_rate must be > 0"));
                }
                jump_law.validate().map_err(|r| self.invalid(r))?;
            }
            ModelFamily::SpectrallyNegativeBmCp {
                drift,
                sigma,
                jump_rate,
                jump_law,
            } => {
                finite("drift", drift)?;
                finite("sigma", sigma)?;
                finite("jump_rate", jump_rate)?;
                if sigma <= 0.0 {
                    return Err(self.invalid("sigma must be > 0"));
                }
                if jump_rate < 0.0 {
                    return Err(self.invalid("jump_rate must be >= 0"));
                }
                jump_law.validate().map_err(|r| self.invalid(r))?;
            }
        }
        Ok(())
    }

    /// `E X_1`, when finite.
    pub fn mean(&self) -> Option<f64> {
        match self.family {
            ModelFamily::BrownianWithDrift { drift, .. } => Some(drift),
            ModelFamily::Stable { alpha, .. } => (alpha > 1.0).then_some(0.0),
            ModelFamily::SpectrallyPositiveCpDrift {
                drift,
                jump_rate,
                jump_law,
            } => Some(drift + jump_rate * jump_law.mean()),
            ModelFamily::SpectrallyNegativeBmCp {
                drift,
                jump_rate,
                jump_law,
                ..
            } => Some(drift - jump_rate * jump_law.mean()),
        }
    }

    pub fn has_gaussian_component(&self) -> bool {
        match self.family {
            ModelFamily::BrownianWithDrift { sigma, .. } => sigma > 0.0,
            ModelFamily::Stable { alpha, .. } => alpha == 2.0,
            ModelFamily::SpectrallyPositiveCpDrift { .. } => false,
            ModelFamily::SpectrallyNegativeBmCp { .. } => true,
        }
    }

    pub fn has_positive_jumps(&self) -> bool {
        match self.family {
            ModelFamily::BrownianWithDrift { .. } | ModelFamily::SpectrallyNegativeBmCp { .. } => {
                false
            }
            ModelFamily::Stable { alpha, beta, .. } => alpha < 2.0 && beta > -1.0,
            ModelFamily::SpectrallyPositiveCpDrift { .. } => true,
        }
    }

    pub fn has_negative_jumps(&self) -> bool {
        match self.family {
            ModelFamily::BrownianWithDrift { .. } | ModelFamily::SpectrallyPositiveCpDrift { .. } => {
                false
            }
            ModelFamily::Stable { alpha, beta, .. } => alpha < 2.0 && beta < 1.0,
            ModelFamily::SpectrallyNegativeBmCp { jump_rate, .. } => jump_rate > 0.0,
        }
    }

    /// Whether first passage below a level happens continuously. For these
    /// families that is exactly "no negative jumps and the process can move down".
    pub fn creeps_downwards(&self) -> bool {
        match self.family {
            ModelFamily::BrownianWithDrift { drift, sigma } => sigma > 0.0 || drift < 0.0,
            ModelFamily::Stable { alpha, beta, .. } => alpha == 2.0 || (alpha > 1.0 && beta == 1.0),
            ModelFamily::SpectrallyPositiveCpDrift { .. } => true,
            ModelFamily::SpectrallyNegativeBmCp { jump_rate, .. } => jump_rate == 0.0,
        }
    }

    /// Typical size of the non-jump part of one grid increment. Used as the
    /// tolerance scale when a skeleton decides whether a level was crept over.
    pub fn step_scale(&self, dt: f64) -> f64 {
        match self.family {
            ModelFamily::BrownianWithDrift { drift, sigma } => sigma * dt.sqrt() + drift.abs() * dt,
            ModelFamily::Stable { alpha, scale, .. } => scale * dt.powf(1.0 / alpha),
            ModelFamily::SpectrallyPositiveCpDrift { drift, .. } => drift.abs() * dt,
            ModelFamily::SpectrallyNegativeBmCp { drift, sigma, .. } => {
                sigma * dt.sqrt() + drift.abs() * dt
            }
        }
    }

    /// Rate `Phi > 0` with `P_x(X ever goes below 0) = exp(-Phi x)` for a
    /// spectrally positive model drifting to `+inf`; `None` otherwise.
    pub fn downward_exit_rate(&self) -> Option<f64> {
        let ModelFamily::SpectrallyPositiveCpDrift {
            drift,
            jump_rate,
            jump_law,
        } = self.family
        else {
            return None;
        };
        if drift + jump_rate * jump_law.mean() <= 0.0 {
            return None;
        }
        // log E exp(-lambda X_1) = -drift*lambda + rate*(L(lambda) - 1); convex, zero at 0,
        // negative slope at 0, positive beyond rate/|drift|.
        let psi = |l: f64| -drift * l + jump_rate * (jump_law.laplace(l) - 1.0);
        let mut lo = 1e-12;
        let mut hi = jump_rate / drift.abs() + 1.0;
        while psi(hi) <= 0.0 {
            hi *= 2.0;
        }
        while psi(lo) >= 0.0 && lo < hi {
            lo *= 10.0;
        }
        for _ in 0..200 {
            let mid = 0.5 * (lo + hi);
            if psi(mid) < 0.0 {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        Some(0.5 * (lo + hi))
    }

    /// Draw one signed jump of the compound Poisson component, if there is one.
    pub fn sample_jump<R: Rng + ?Sized>(&self, rng: &mut R) -> Option<f64> {
        match self.family {
            ModelFamily::SpectrallyPositiveCpDrift { jump_law, .. } => Some(jump_law.sample(rng)),
            ModelFamily::SpectrallyNegativeBmCp {
                jump_law,
                jump_rate,
                ..
            } if jump_rate > 0.0 => Some(-jump_law.sample(rng)),
            _ => None,
        }
    }
}

/// Closed-form classification.
///
/// Rules, per family:
/// * a Gaussian component makes 0 regular in both directions and the process
///   creeps upwards;
/// * bounded variation with negative drift and only positive jumps: regular
///   downwards, irregular upwards, no upward creeping;
/// * stable with `alpha < 2` (the admitted parameter range): regular both ways;
///   creeps upwards only when there are no positive jumps (`beta = -1`, `alpha > 1`);
/// * drift to `-inf` iff `E X_1 < 0`; stable processes oscillate.
pub fn classify(spec: &LevyModelSpec) -> Result<RegularityFlags> {
    spec.validate()?;
    let drifts_down = spec.mean().is_some_and(|m| m < 0.0);
    let (regular_upwards, regular_downwards, creeps_upwards) = match spec.family {
        ModelFamily::BrownianWithDrift { drift, sigma } => {
            if sigma > 0.0 {
                (true, true, true)
            } else if drift > 0.0 {
                (true, false, true)
            } else {
                (false, true, false)
            }
        }
        ModelFamily::Stable { alpha, beta, .. } => {
            if alpha == 2.0 {
                (true, true, true)
            } else {
                (true, true, alpha > 1.0 && beta == -1.0)
            }
        }
        ModelFamily::SpectrallyPositiveCpDrift { .. } => (false, true, false),
        ModelFamily::SpectrallyNegativeBmCp { .. } => (true, true, true),
    };
    Ok(RegularityFlags {
        regular_upwards,
        regular_downwards,
        creeps_upwards,
        drifts_to_minus_infinity: drifts_down,
        oscillates_or_drifts_up: !drifts_down,
    })
}

#[derive(Debug, Clone, Copy)]
enum Kernel {
    Gaussian {
        mean: f64,
        sd: f64,
    },
    Stable {
        alpha: f64,
        beta: f64,
        /// scale of the increment, `scale * dt^(1/alpha)` or `scale * dt`
        sigma: f64,
        shift: f64,
        xi: f64,
        lead: f64,
    },
    Compound {
        drift_dt: f64,
        sd: f64,
        p0: f64,
        poisson_mean: f64,
        jump_law: JumpLaw,
        sign: f64,
    },
}

/// Exact increment sampler for a fixed `(spec, dt)`; constants are precomputed.
#[derive(Debug, Clone, Copy)]
pub struct IncrementSampler {
    kernel: Kernel,
    dt: f64,
}

impl IncrementSampler {
    pub fn new(spec: &LevyModelSpec, dt: f64) -> Result<Self> {
        spec.validate()?;
        crate::error::ensure_positive("dt", dt)?;
        let kernel = match spec.family {
            ModelFamily::BrownianWithDrift { drift, sigma } => Kernel::Gaussian {
                mean: drift * dt,
                sd: sigma * dt.sqrt(),
            },
            ModelFamily::Stable { alpha, beta, scale } => {
                if alpha == 1.0 {
                    let sigma = scale * dt;
                    Kernel::Stable {
                        alpha,
                        beta,
                        sigma,
                        shift: 2.0 / PI * beta * sigma * sigma.ln(),
                        xi: FRAC_PI_2,
                        lead: 1.0,
                    }
                } else {
                    let zeta = -beta * (PI * alpha / 2.0).tan();
                    Kernel::Stable {
                        alpha,
                        beta,
                        sigma: scale * dt.powf(1.0 / alpha),
                        shift: 0.0,
                        xi: (-zeta).atan() / alpha,
                        lead: (1.0 + zeta * zeta).powf(1.0 / (2.0 * alpha)),
                    }
                }
            }
            ModelFamily::SpectrallyPositiveCpDrift {
                drift,
                jump_rate,
                jump_law,
            } => Kernel::Compound {
                drift_dt: drift * dt,
                sd: 0.0,
                p0: (-jump_rate * dt).exp(),
                poisson_mean: jump_rate * dt,
                jump_law,
                sign: 1.0,
            },
            ModelFamily::SpectrallyNegativeBmCp {
                drift,
                sigma,
                jump_rate,
                jump_law,
            } => Kernel::Compound {
                drift_dt: drift * dt,
                sd: sigma * dt.sqrt(),
                p0: (-jump_rate * dt).exp(),
                poisson_mean: jump_rate * dt,
                jump_law,
                sign: -1.0,
            },
        };
        Ok(Self { kernel, dt })
    }

    pub fn dt(&self) -> f64 {
        self.dt
    }

    #[inline]
    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> f64 {
        match self.kernel {
            Kernel::Gaussian { mean, sd } => {
                let z: f64 = rng.sample(StandardNormal);
                mean + sd * z
            }
            Kernel::Stable {
                alpha,
                beta,
                sigma,
                shift,
                xi,
                lead,
            } => sigma * cms_standard(alpha, beta, xi, lead, rng) + shift,
            Kernel::Compound {
                drift_dt,
                sd,
                p0,
                poisson_mean,
                jump_law,
                sign,
            } => {
                let mut x = drift_dt;
                if sd > 0.0 {
                    let z: f64 = rng.sample(StandardNormal);
                    x += sd * z;
                }
                let n = poisson_small(p0, poisson_mean, rng);
                for _ in 0..n {
                    x += sign * jump_law.sample(rng);
                }
                x
            }
        }
    }
}

/// Poisson draw by sequential inversion; intended for small means.
#[inline]
fn poisson_small<R: Rng + ?Sized>(p0: f64, mean: f64, rng: &mut R) -> u32 {
    let u: f64 = rng.random();
    let mut k = 0u32;
    let mut p = p0;
    let mut cdf = p0;
    while u > cdf {
        k += 1;
        p *= mean / f64::from(k);
        cdf += p;
        if p < 1e-300 {
            break;
        }
    }
    k
}

/// Standardised stable variate `S_alpha(1, beta, 0)` (1-parameterisation).
#[inline]
fn cms_standard<R: Rng + ?Sized>(alpha: f64, beta: f64, xi: f64, lead: f64, rng: &mut R) -> f64 {
    let v = PI * (open01(rng) - 0.5);
    let w: f64 = rng.sample(Exp1);
    if alpha == 1.0 {
        let a = FRAC_PI_2 + beta * v;
        (a * v.tan() - beta * ((FRAC_PI_2 * w * v.cos()) / a).ln()) / xi
    } else {
        let av = alpha * (v + xi);
        lead * av.sin() / v.cos().powf(1.0 / alpha)
            * ((v - av).cos() / w).powf((1.0 - alpha) / alpha)
    }
}

#[inline]
fn open01<R: Rng + ?Sized>(rng: &mut R) -> f64 {
    loop {
        let u: f64 = rng.random();
        if u > 0.0 {
            return u;
        }
    }
}

/// One exact draw of `X_{t+dt} - X_t`.
pub fn sample_increment<R: Rng + ?Sized>(spec: &LevyModelSpec, dt: f64, rng: &mut R) -> Result<f64> {
    Ok(IncrementSampler::new(spec, dt)?.sample(rng))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::SeedStream;

    fn exp1() -> JumpLaw {
        JumpLaw::Exponential { rate: 1.0 }
    }

    #[test]
    fn brownian_is_regular_and_creeps() {
        let f = classify(&LevyModelSpec::brownian("bm", 0.0, 1.0)).unwrap();
        assert!(f.regular_upwards && f.regular_downwards && f.creeps_upwards);
        assert!(!f.drifts_to_minus_infinity && f.oscillates_or_drifts_up);
    }

    #[test]
    fn spectrally_positive_bounded_variation_flags() {
        let f = classify(&LevyModelSpec::spectrally_positive("cp", -0.5, 1.0, exp1())).unwrap();
        assert!(!f.regular_upwards);
        assert!(f.regular_downwards);
        assert!(!f.creeps_upwards);
        assert!(!f.drifts_to_minus_infinity);
    }

    #[test]
    fn cauchy_regular_but_no_creeping() {
        let f = classify(&LevyModelSpec::stable("cauchy", 1.0, 0.0, 1.0)).unwrap();
        assert!(f.regular_upwards && f.regular_downwards);
        assert!(!f.creeps_upwards);
        let sn = classify(&LevyModelSpec::stable("sn", 1.5, -1.0, 1.0)).unwrap();
        assert!(sn.creeps_upwards);
    }

    #[test]
    fn drift_direction_follows_mean() {
        let down = classify(&LevyModelSpec::brownian("d", -1.0, 1.0)).unwrap();
        assert!(down.drifts_to_minus_infinity && !down.oscillates_or_drifts_up);
        let sn = LevyModelSpec::spectrally_negative("sn", 0.2, 1.0, 1.0, exp1());
        assert!(classify(&sn).unwrap().drifts_to_minus_infinity);
    }

    #[test]
    fn rejects_unsupported_or_degenerate_specs() {
        assert!(classify(&LevyModelSpec::stable("s", 0.8, 1.0, 1.0)).is_err());
        assert!(classify(&LevyModelSpec::stable("s", 1.0, -1.0, 1.0)).is_err());
        assert!(classify(&LevyModelSpec::stable("s", 2.5, 0.0, 1.0)).is_err());
        assert!(classify(&LevyModelSpec::brownian("z", 0.0, 0.0)).is_err());
        assert!(classify(&LevyModelSpec::spectrally_positive("p", 0.5, 1.0, exp1())).is_err());
        let bad = JumpLaw::Uniform { upper: -1.0 };
        assert!(classify(&LevyModelSpec::spectrally_positive("p", -0.5, 1.0, bad)).is_err());
    }

    #[test]
    fn flags_are_exclusive_and_creeping_needs_gaussian_or_no_positive_jumps() {
        let specs = [
            LevyModelSpec::brownian("a", 0.3, 1.0),
            LevyModelSpec::brownian("b", -2.0, 0.0),
            LevyModelSpec::brownian("c", 2.0, 0.0),
            LevyModelSpec::stable("d", 1.5, 0.3, 1.0),
            LevyModelSpec::stable("e", 0.7, 0.0, 2.0),
            LevyModelSpec::spectrally_positive("f", -1.0, 1.0, JumpLaw::PointMass { at: 0.5 }),
            LevyModelSpec::spectrally_negative("g", 0.0, 0.5, 2.0, exp1()),
        ];
        for s in &specs {
            let f = classify(s).unwrap();
            assert_ne!(f.drifts_to_minus_infinity, f.oscillates_or_drifts_up);
            if f.creeps_upwards {
                assert!(s.has_gaussian_component() || !s.has_positive_jumps(), "{}", s.label);
            }
        }
    }

    #[test]
    fn deterministic_drift_increment() {
        let spec = LevyModelSpec::brownian("det", 2.0, 0.0);
        let mut rng = SeedStream::new(1, "t").rng(0);
        assert_eq!(sample_increment(&spec, 0.5, &mut rng).unwrap(), 1.0);
    }

    #[test]
    fn sampling_is_deterministic_given_stream() {
        let spec = LevyModelSpec::stable("s", 1.3, 0.4, 0.7);
        let s = IncrementSampler::new(&spec, 0.01).unwrap();
        let a: Vec<f64> = {
            let mut r = SeedStream::new(5, "x").rng(3);
            (0..10).map(|_| s.sample(&mut r)).collect()
        };
        let b: Vec<f64> = {
            let mut r = SeedStream::new(5, "x").rng(3);
            (0..10).map(|_| s.sample(&mut r)).collect()
        };
        assert_eq!(a, b);
    }

    #[test]
    fn compound_poisson_increment_mean_matches_drift_plus_jumps() {
        // E[increment] = (-1 + 1 * 1) dt = 0; 10^6 draws, 3 standard errors.
        let spec = LevyModelSpec::spectrally_positive("cp", -1.0, 1.0, exp1());
        let dt = 0.1;
        let s = IncrementSampler::new(&spec, dt).unwrap();
        let mut r = SeedStream::new(11, "cp-mean").rng(0);
        let n = 1_000_000;
        let (mut sum, mut sq) = (0.0, 0.0);
        for _ in 0..n {
            let x = s.sample(&mut r);
            sum += x;
            sq += x * x;
        }
        let mean = sum / n as f64;
        let var = sq / n as f64 - mean * mean;
        let se = (var / n as f64).sqrt();
        assert!(mean.abs() < 3.0 * se, "mean {mean} se {se}");
        // Var = rate * E J^2 * dt = 2 dt
        assert!((var - 0.2).abs() < 0.01, "var {var}");
    }

    #[test]
    fn jumps_carry_the_declared_sign() {
        let sp = LevyModelSpec::spectrally_positive("p", -0.5, 1.0, exp1());
        let sn = LevyModelSpec::spectrally_negative("n", 0.0, 1.0, 1.0, JumpLaw::Uniform { upper: 2.0 });
        let mut r = SeedStream::new(3, "sign").rng(0);
        let mut neg = 0usize;
        let mut pos = 0usize;
        for _ in 0..1_000_000 {
            if sp.sample_jump(&mut r).unwrap() < 0.0 {
                neg += 1;
            }
            if sn.sample_jump(&mut r).unwrap() > 0.0 {
                pos += 1;
            }
        }
        assert_eq!(neg, 0);
        assert_eq!(pos, 0);
        assert!(LevyModelSpec::brownian("b", 0.0, 1.0).sample_jump(&mut r).is_none());
    }

    #[test]
    fn downward_exit_rate_solves_laplace_exponent() {
        // drift -0.5, Exp(1) jumps: 0.5 l - l/(1+l) = 0 at l = 1
        let spec = LevyModelSpec::spectrally_positive("cp", -0.5, 1.0, exp1());
        let phi = spec.downward_exit_rate().unwrap();
        assert!((phi - 1.0).abs() < 1e-9, "{phi}");
        let osc = LevyModelSpec::spectrally_positive("o", -1.0, 1.0, exp1());
        assert!(osc.downward_exit_rate().is_none());
    }

    #[test]
    fn cauchy_quartiles() {
        // standard Cauchy: P(|X| <= 1) = 1/2; increment over dt scales by dt
        let spec = LevyModelSpec::stable("c", 1.0, 0.0, 1.0);
        let s = IncrementSampler::new(&spec, 0.5).unwrap();
        let mut r = SeedStream::new(9, "cauchy").rng(0);
        let n = 200_000;
        let inside = (0..n).filter(|_| s.sample(&mut r).abs() <= 0.5).count();
        let p = inside as f64 / n as f64;
        assert!((p - 0.5).abs() < 4.0 * (0.25 / n as f64).sqrt(), "{p}");
    }
}
