//! Experiment configuration and suite runner.
//!
//! A suite is a TOML file with a root seed, model definitions and a list of
//! named test jobs:
//!
//! ```toml
//! seed = 42
//! output_dir = "results"
//! tests = ["bm-min-law"]   # optional selection; all jobs when absent
//!
//! [defaults]
//! dt = 0.01
//! n_paths = 10000
//!
//! [[model]]
//! label = "bm"
//! family = "brownian_with_drift"
//! drift = 0.0
//! sigma = 1.0
//!
//! [[test]]
//! name = "bm-min-law"
//! kind = "min_law"
//! model = "bm"
//! x0 = 1.0
//! epsilon = [0.05, 0.01]
//! ```
//!
//! Unknown keys are rejected, as are keys that the job kind does not use.

use std::collections::{BTreeMap, BTreeSet, HashSet};
use std::fs;
use std::path::{Path, PathBuf};

use rand::Rng;
use rand_distr::{Distribution, Exp1, StandardNormal};
use serde::{Deserialize, Serialize};
use serde_json::Value;
use toml::Spanned;

use crate::conditioning::ConditionedSampleConfig;
use crate::error::{Error, Result};
use crate::harmonic::{
    check_excessive_invariant, closed_form_estimate, estimate_h_ladder, geometric_levels,
    HarmonicEstimate, LadderConfig,
};
use crate::models::{JumpLaw, LevyModelSpec, ModelFamily};
use crate::rng::SeedStream;
use crate::stats::{
    distance_correlation_test, ks_one_sample, ks_two_sample, normal_quantile_two_sided,
    spearman_decreasing, wilson_interval, EmpiricalDistribution, ALPHA,
};
use crate::verify::{self, Check, EntranceReference, LimitReference, ShapeCheck, Table, TestReport};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum JobKind {
    EstimateH,
    MinLaw,
    HConsistency,
    ExcessiveInvariant,
    EntranceLaw,
    WeakConvergence,
    ExcursionIdentity,
    EntranceAsymptotics,
    Creeping,
    LastPassage,
    Independence,
}

impl JobKind {
    fn allowed_keys(self) -> &'static [&'static str] {
        use JobKind::*;
        match self {
            EstimateH => &["dt", "n_paths", "horizon", "h_method", "level_min_exp", "level_max_exp"],
            MinLaw => &["dt", "n_paths", "epsilon", "x0", "h_method", "h_dt", "h_paths", "h_horizon", "level_min_exp", "level_max_exp"],
            HConsistency => &["dt", "n_paths", "horizon", "pairs", "barrier", "h_paths", "level_min_exp", "level_max_exp", "shape_ratio", "shape_exponent", "shape_tolerance"],
            ExcessiveInvariant => &["dt", "n_paths", "points", "h_method", "h_paths", "h_horizon", "level_min_exp", "level_max_exp"],
            EntranceLaw => &["dt", "n_paths", "t_large", "entrance_reference"],
            WeakConvergence => &["dt", "n_paths", "x_grid", "t", "n_eff", "max_paths", "limit", "t_large", "n_limit", "trend_alpha", "bridge_correction", "h_method", "h_dt", "h_paths", "h_horizon", "level_min_exp", "level_max_exp", "in_proof_x", "in_proof_threshold", "epsilon", "in_proof_paths"],
            ExcursionIdentity => &["dt", "n_paths", "horizon", "t_values", "levels_a", "t_large", "n_limit", "tolerance", "h_method", "h_paths", "h_horizon", "level_min_exp", "level_max_exp"],
            EntranceAsymptotics => &["dt", "n_paths", "horizon", "t", "x_grid", "levels_a", "t_large", "n_limit", "tolerance", "h_method", "h_paths", "h_horizon", "level_min_exp", "level_max_exp"],
            Creeping => &["dt", "n_paths", "x_grid", "max_steps", "tolerance", "tolerance_c", "refine_factor", "n_passage", "t_large", "h_method", "h_paths", "h_horizon", "level_min_exp", "level_max_exp"],
            LastPassage => &["dt", "n_paths", "x", "t_large", "max_steps"],
            Independence => &["dt", "n_paths", "x0", "epsilon", "lag", "permutations"],
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum HMethodChoice {
    ClosedForm,
    Ladder,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LimitChoice {
    Bes3,
    LimitConstruction,
}

/// One `[[test]]` table. Fields not used by `kind` must be absent.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TestEntry {
    pub name: String,
    pub kind: Option<JobKind>,
    pub model: String,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub dt: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub n_paths: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub horizon: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub epsilon: Option<Vec<f64>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub x0: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub x: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub x_grid: Option<Vec<f64>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub t: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub t_values: Option<Vec<f64>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub points: Option<Vec<(f64, f64)>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub pairs: Option<Vec<(f64, f64)>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub levels_a: Option<Vec<f64>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub barrier: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub h_method: Option<HMethodChoice>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub h_dt: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub h_paths: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub h_horizon: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub level_min_exp: Option<i32>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub level_max_exp: Option<i32>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub t_large: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub n_limit: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub n_eff: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub max_paths: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub max_steps: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub limit: Option<LimitChoice>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub trend_alpha: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub bridge_correction: Option<bool>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub entrance_reference: Option<EntranceReference>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub shape_ratio: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub shape_exponent: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub shape_tolerance: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub in_proof_x: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub in_proof_threshold: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub in_proof_paths: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub tolerance: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub tolerance_c: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub refine_factor: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub n_passage: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub lag: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub permutations: Option<usize>,
}

impl TestEntry {
    pub fn new(name: &str, kind: JobKind, model: &str) -> Self {
        Self {
            name: name.into(),
            kind: Some(kind),
            model: model.into(),
            ..Self::default()
        }
    }

    fn kind(&self) -> Result<JobKind> {
        self.kind
            .ok_or_else(|| Error::Config(format!("test `{}` has no `kind`", self.name)))
    }

    /// Keys present on this entry that its kind does not use.
    fn stray_keys(&self) -> Result<Vec<String>> {
        let kind = self.kind()?;
        let table = toml::Table::try_from(self).map_err(|e| Error::Config(e.to_string()))?;
        let allowed: HashSet<&str> = kind.allowed_keys().iter().copied().collect();
        Ok(table
            .keys()
            .filter(|k| !matches!(k.as_str(), "name" | "kind" | "model"))
            .filter(|k| !allowed.contains(k.as_str()))
            .cloned()
            .collect())
    }
}

/// One `[[model]]` table; family-specific fields are checked on conversion.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelEntry {
    pub label: String,
    pub family: String,
    pub drift: Option<f64>,
    pub sigma: Option<f64>,
    pub alpha: Option<f64>,
    pub beta: Option<f64>,
    pub scale: Option<f64>,
    pub jump_rate: Option<f64>,
    pub jump_law: Option<JumpLaw>,
}

impl ModelEntry {
    pub fn to_spec(&self) -> Result<LevyModelSpec> {
        let need = |name: &str, v: Option<f64>| {
            v.ok_or_else(|| Error::Config(format!("model `{}` needs `{name}`", self.label)))
        };
        let family = match self.family.as_str() {
            "brownian_with_drift" => ModelFamily::BrownianWithDrift {
                drift: self.drift.unwrap_or(0.0),
                sigma: need("sigma", self.sigma)?,
            },
            "stable" => ModelFamily::Stable {
                alpha: need("alpha", self.alpha)?,
                beta: self.beta.unwrap_or(0.0),
                scale: self.scale.unwrap_or(1.0),
            },
            "spectrally_positive_cp_drift" => ModelFamily::SpectrallyPositiveCpDrift {
                drift: need("drift", self.drift)?,
                jump_rate: need("jump_rate", self.jump_rate)?,
                jump_law: self
                    .jump_law
                    .ok_or_else(|| Error::Config(format!("model `{}` needs `jump_law`", self.label)))?,
            },
            "spectrally_negative_bm_cp" => ModelFamily::SpectrallyNegativeBmCp {
                drift: self.drift.unwrap_or(0.0),
                sigma: need("sigma", self.sigma)?,
                jump_rate: need("jump_rate", self.jump_rate)?,
                jump_law: self
                    .jump_law
                    .ok_or_else(|| Error::Config(format!("model `{}` needs `jump_law`", self.label)))?,
            },
            other => {
                return Err(Error::Config(format!(
                    "model `{}`: unknown family `{other}`",
                    self.label
                )))
            }
        };
        let allowed: &[&str] = match family {
            ModelFamily::BrownianWithDrift { .. } => &["drift", "sigma"],
            ModelFamily::Stable { .. } => &["alpha", "beta", "scale"],
            ModelFamily::SpectrallyPositiveCpDrift { .. } => &["drift", "jump_rate", "jump_law"],
            ModelFamily::SpectrallyNegativeBmCp { .. } => &["drift", "sigma", "jump_rate", "jump_law"],
        };
        let present = [
            ("drift", self.drift.is_some()),
            ("sigma", self.sigma.is_some()),
            ("alpha", self.alpha.is_some()),
            ("beta", self.beta.is_some()),
            ("scale", self.scale.is_some()),
            ("jump_rate", self.jump_rate.is_some()),
            ("jump_law", self.jump_law.is_some()),
        ];
        if let Some((k, _)) = present.iter().find(|(k, p)| *p && !allowed.contains(k)) {
            return Err(Error::Config(format!(
                "model `{}`: `{k}` does not apply to family `{}`",
                self.label, self.family
            )));
        }
        let spec = LevyModelSpec::new(self.label.clone(), family);
        spec.validate()?;
        Ok(spec)
    }

    pub fn from_spec(spec: &LevyModelSpec) -> Self {
        let mut e = ModelEntry {
            label: spec.label.clone(),
            ..Self::default()
        };
        match spec.family {
            ModelFamily::BrownianWithDrift { drift, sigma } => {
                e.family = "brownian_with_drift".into();
                e.drift = Some(drift);
                e.sigma = Some(sigma);
            }
            ModelFamily::Stable { alpha, beta, scale } => {
                e.family = "stable".into();
                e.alpha = Some(alpha);
                e.beta = Some(beta);
                e.scale = Some(scale);
            }
            ModelFamily::SpectrallyPositiveCpDrift { drift, jump_rate, jump_law } => {
                e.family = "spectrally_positive_cp_drift".into();
                e.drift = Some(drift);
                e.jump_rate = Some(jump_rate);
                e.jump_law = Some(jump_law);
            }
            ModelFamily::SpectrallyNegativeBmCp { drift, sigma, jump_rate, jump_law } => {
                e.family = "spectrally_negative_bm_cp".into();
                e.drift = Some(drift);
                e.sigma = Some(sigma);
                e.jump_rate = Some(jump_rate);
                e.jump_law = Some(jump_law);
            }
        }
        e
    }
}

/// Values used when a test entry leaves a field unset.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Defaults {
    pub dt: Option<f64>,
    pub n_paths: Option<usize>,
    pub horizon: Option<f64>,
    pub epsilon: Option<Vec<f64>>,
}

/// Command-line overrides; they win over both test entries and defaults.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Overrides {
    pub seed: Option<u64>,
    pub output_dir: Option<PathBuf>,
    pub dt: Option<f64>,
    pub n_paths: Option<usize>,
    pub horizon: Option<f64>,
    pub epsilon: Option<Vec<f64>>,
    pub threads: Option<usize>,
    pub tests: Option<Vec<String>>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub seed: u64,
    pub output_dir: PathBuf,
    /// Worker threads; 0 uses every core.
    #[serde(default)]
    pub threads: usize,
    /// Names of the tests to run, in order; every test when absent.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub tests: Option<Vec<String>>,
    #[serde(default)]
    pub defaults: Defaults,
    #[serde(default, rename = "model")]
    pub models: Vec<ModelEntry>,
    #[serde(default, rename = "test")]
    pub test_entries: Vec<TestEntry>,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct RawConfig {
    seed: Option<u64>,
    output_dir: Option<PathBuf>,
    #[serde(default)]
    threads: usize,
    #[serde(default)]
    tests: Option<Vec<String>>,
    #[serde(default)]
    defaults: Defaults,
    #[serde(default)]
    model: Vec<Spanned<ModelEntry>>,
    #[serde(default)]
    test: Vec<Spanned<TestEntry>>,
}

fn line_of(src: &str, offset: usize) -> usize {
    src[..offset.min(src.len())].matches('\n').count() + 1
}

impl ExperimentConfig {
    pub fn load(path: &Path) -> Result<Self> {
        let src = fs::read_to_string(path)
            .map_err(|e| Error::Config(format!("cannot read {}: {e}", path.display())))?;
        Self::parse(&src).map_err(|e| match e {
            Error::Config(msg) => Error::Config(format!("{}: {msg}", path.display())),
            other => other,
        })
    }

    /// Parse and validate; every error names the offending line.
    pub fn parse(src: &str) -> Result<Self> {
        let raw: RawConfig = toml::from_str(src).map_err(|e| Error::Config(e.to_string()))?;
        let seed = raw
            .seed
            .ok_or_else(|| Error::Config("`seed` is required (there is no clock-based default)".into()))?;
        let output_dir = raw
            .output_dir
            .ok_or_else(|| Error::Config("`output_dir` is required".into()))?;
        let mut labels = BTreeSet::new();
        for m in &raw.model {
            let at = line_of(src, m.span().start);
            m.get_ref()
                .to_spec()
                .map_err(|e| Error::Config(format!("line {at}: {e}")))?;
            if !labels.insert(m.get_ref().label.clone()) {
                return Err(Error::Config(format!(
                    "line {at}: duplicate model label `{}`",
                    m.get_ref().label
                )));
            }
        }
        let mut names = BTreeSet::new();
        for t in &raw.test {
            let at = line_of(src, t.span().start);
            let e = t.get_ref();
            if !labels.contains(&e.model) {
                return Err(Error::Config(format!(
                    "line {at}: test `{}` refers to unknown model `{}`",
                    e.name, e.model
                )));
            }
            if !names.insert(e.name.clone()) {
                return Err(Error::Config(format!("line {at}: duplicate test name `{}`", e.name)));
            }
            let stray = e.stray_keys().map_err(|err| Error::Config(format!("line {at}: {err}")))?;
            if !stray.is_empty() {
                return Err(Error::Config(format!(
                    "line {at}: test `{}` of kind {:?} does not use {}",
                    e.name,
                    e.kind,
                    stray.join(", ")
                )));
            }
        }
        let cfg = ExperimentConfig {
            seed,
            output_dir,
            threads: raw.threads,
            tests: raw.tests,
            defaults: raw.defaults,
            models: raw.model.into_iter().map(Spanned::into_inner).collect(),
            test_entries: raw.test.into_iter().map(Spanned::into_inner).collect(),
        };
        cfg.selection()?;
        Ok(cfg)
    }

    pub fn to_toml(&self) -> Result<String> {
        toml::to_string(self).map_err(|e| Error::Config(e.to_string()))
    }

    pub fn model(&self, label: &str) -> Result<LevyModelSpec> {
        self.models
            .iter()
            .find(|m| m.label == label)
            .ok_or_else(|| Error::Config(format!("unknown model label `{label}`")))?
            .to_spec()
    }

    /// Selected entries in run order.
    pub fn selection(&self) -> Result<Vec<&TestEntry>> {
        match &self.tests {
            None => Ok(self.test_entries.iter().collect()),
            Some(names) => names
                .iter()
                .map(|n| {
                    self.test_entries
                        .iter()
                        .find(|t| &t.name == n)
                        .ok_or_else(|| Error::Config(format!("selected test `{n}` is not defined")))
                })
                .collect(),
        }
    }

    pub fn with_output_dir(&self, dir: &Path) -> Self {
        Self {
            output_dir: dir.to_path_buf(),
            ..self.clone()
        }
    }

    pub fn apply(&mut self, o: &Overrides) -> Result<()> {
        if let Some(s) = o.seed {
            self.seed = s;
        }
        if let Some(d) = &o.output_dir {
            self.output_dir = d.clone();
        }
        if let Some(t) = o.threads {
            self.threads = t;
        }
        if let Some(sel) = &o.tests {
            self.tests = Some(sel.clone());
        }
        for t in &mut self.test_entries {
            if o.dt.is_some() {
                t.dt = o.dt;
            }
            if o.n_paths.is_some() {
                t.n_paths = o.n_paths;
            }
            if o.horizon.is_some() && t.kind.is_some_and(|k| k.allowed_keys().contains(&"horizon")) {
                t.horizon = o.horizon;
            }
            if o.epsilon.is_some() && t.kind.is_some_and(|k| k.allowed_keys().contains(&"epsilon")) {
                t.epsilon = o.epsilon.clone();
            }
        }
        if o.dt.is_some() {
            self.defaults.dt = o.dt;
        }
        if o.n_paths.is_some() {
            self.defaults.n_paths = o.n_paths;
        }
        if o.horizon.is_some() {
            self.defaults.horizon = o.horizon;
        }
        if o.epsilon.is_some() {
            self.defaults.epsilon = o.epsilon.clone();
        }
        self.selection()?;
        Ok(())
    }

    /// A small-scale run of every job kind that applies to standard Brownian motion.
    pub fn default_bm_suite(seed: u64, threads: usize) -> Self {
        use JobKind::*;
        let mut tests = Vec::new();
        let mut add = |name: &str, kind: JobKind, f: &dyn Fn(&mut TestEntry)| {
            let mut e = TestEntry::new(name, kind, "bm");
            f(&mut e);
            tests.push(e);
        };
        add("h-estimate", EstimateH, &|e| {
            e.h_method = Some(HMethodChoice::Ladder);
            e.n_paths = Some(2_000);
        });
        add("min-law", MinLaw, &|e| {
            e.x0 = Some(1.0);
            e.epsilon = Some(vec![0.05]);
            e.n_paths = Some(500);
            e.h_method = Some(HMethodChoice::ClosedForm);
        });
        add("h-consistency", HConsistency, &|e| {
            e.n_paths = Some(2_000);
            e.h_paths = Some(2_000);
            e.pairs = Some(vec![(1.0, 2.0)]);
            e.shape_ratio = Some(0.5);
            e.shape_tolerance = Some(0.2);
        });
        add("excessive-invariant", ExcessiveInvariant, &|e| {
            e.points = Some(vec![(1.0, 1.0), (0.5, 0.5)]);
            e.n_paths = Some(2_000);
            e.h_paths = Some(2_000);
        });
        add("weak-convergence", WeakConvergence, &|e| {
            e.x_grid = Some(vec![0.8, 0.4]);
            e.n_eff = Some(2_000.0);
            e.max_paths = Some(100_000);
            e.h_method = Some(HMethodChoice::ClosedForm);
        });
        add("excursion-identity", ExcursionIdentity, &|e| {
            e.n_paths = Some(300);
            e.n_limit = Some(500);
            e.t_large = Some(20.0);
            e.h_paths = Some(2_000);
        });
        add("creeping", Creeping, &|e| {
            e.dt = Some(1e-3);
            e.x_grid = Some(vec![0.5, 0.25]);
            e.n_paths = Some(300);
            e.h_paths = Some(500);
            e.h_horizon = Some(2.0);
            e.t_large = Some(1.0);
        });
        add("last-passage", LastPassage, &|e| {
            e.n_paths = Some(300);
            e.t_large = Some(20.0);
        });
        add("independence", Independence, &|e| {
            e.n_paths = Some(200);
            e.epsilon = Some(vec![0.1]);
        });
        ExperimentConfig {
            seed,
            output_dir: PathBuf::from("results"),
            threads,
            tests: None,
            defaults: Defaults {
                dt: Some(0.01),
                n_paths: Some(1_000),
                horizon: Some(20.0),
                epsilon: Some(vec![0.01]),
            },
            models: vec![ModelEntry::from_spec(&LevyModelSpec::brownian("bm", 0.0, 1.0))],
            test_entries: tests,
        }
    }
}

/// A test entry with defaults filled in.
struct Job<'a> {
    entry: &'a TestEntry,
    defaults: &'a Defaults,
}

impl Job<'_> {
    fn dt(&self) -> f64 {
        self.entry.dt.or(self.defaults.dt).unwrap_or(0.01)
    }

    fn n_paths(&self) -> usize {
        self.entry.n_paths.or(self.defaults.n_paths).unwrap_or(10_000)
    }

    fn horizon(&self) -> f64 {
        self.entry.horizon.or(self.defaults.horizon).unwrap_or(20.0)
    }

    fn epsilons(&self) -> Vec<f64> {
        self.entry
            .epsilon
            .clone()
            .or_else(|| self.defaults.epsilon.clone())
            .unwrap_or_else(|| vec![0.01])
    }

    fn levels(&self) -> Vec<f64> {
        geometric_levels(
            self.entry.level_min_exp.unwrap_or(-6),
            self.entry.level_max_exp.unwrap_or(3),
        )
    }

    fn h(&self, spec: &LevyModelSpec, seeds: &SeedStream, default: HMethodChoice) -> Result<HarmonicEstimate> {
        let levels = self.levels();
        match self.entry.h_method.unwrap_or(default) {
            HMethodChoice::ClosedForm => closed_form_estimate(spec, &levels).ok_or_else(|| {
                Error::Config(format!("model `{}` has no closed-form h; use h_method = \"ladder\"", spec.label))
            }),
            HMethodChoice::Ladder => {
                let cfg = LadderConfig::new(
                    self.entry.h_dt.unwrap_or_else(|| self.dt()),
                    self.entry.h_paths.unwrap_or_else(|| self.n_paths()),
                    self.entry.h_horizon.unwrap_or_else(|| self.horizon()),
                );
                estimate_h_ladder(spec, &levels, &cfg, &seeds.child("h"))
            }
        }
    }

    fn sampler(&self, x0: f64, epsilon: f64) -> ConditionedSampleConfig {
        ConditionedSampleConfig {
            x0,
            epsilon,
            dt: self.dt(),
            horizon: 0.0,
            max_rejections: 100_000_000,
            seed: 0,
        }
    }
}

fn estimate_report(spec: &LevyModelSpec, h: &HarmonicEstimate) -> TestReport {
    let mut rep = TestReport::new("harmonic_estimate", &spec.label);
    rep.param("method", h.method.as_str());
    rep.note(h.normalization_note.clone());
    let mut table = Table::new(&["level", "value", "stderr"]);
    for i in 0..h.levels.len() {
        table.push(vec![h.levels[i], h.values[i], h.stderr[i]]);
    }
    rep.table = Some(table);
    let viol = h.monotonicity_violation();
    rep.push_check(Check::at_most("monotonicity_violation_in_se", viol, 3.0));
    rep.finish();
    rep
}

fn run_job(spec: &LevyModelSpec, job: &Job, seeds: &SeedStream) -> Result<Vec<TestReport>> {
    use JobKind::*;
    let e = job.entry;
    let reports = match e.kind()? {
        EstimateH => vec![estimate_report(spec, &job.h(spec, seeds, HMethodChoice::Ladder)?)],
        MinLaw => {
            let h = job.h(spec, seeds, HMethodChoice::Ladder)?;
            let x0 = e.x0.unwrap_or(1.0);
            job.epsilons()
                .iter()
                .enumerate()
                .map(|(i, &eps)| {
                    let cfg = verify::MinLawConfig {
                        sampler: job.sampler(x0, eps),
                        n_samples: job.n_paths(),
                    };
                    verify::verify_min_law(spec, &h, &cfg, None, &seeds.child(&format!("eps-{i}")))
                })
                .collect::<Result<_>>()?
        }
        HConsistency => {
            let pairs = e.pairs.clone().unwrap_or_else(|| vec![(1.0, 2.0), (0.5, 2.0)]);
            let tol = e.shape_tolerance.unwrap_or(0.1);
            let shape = match (e.shape_ratio, e.shape_exponent) {
                (Some(target), _) => Some(ShapeCheck::Ratio {
                    x: pairs[0].0,
                    y: pairs[0].1,
                    target,
                    rel_tol: tol,
                }),
                (None, Some(exponent)) => Some(ShapeCheck::Exponent { exponent, rel_tol: tol }),
                _ => None,
            };
            let cfg = verify::HConsistencyConfig {
                pairs,
                levels: job.levels(),
                ladder: LadderConfig::new(
                    job.dt(),
                    e.h_paths.unwrap_or_else(|| job.n_paths()),
                    job.horizon(),
                ),
                barrier: e.barrier.unwrap_or(20.0),
                exit_dt: job.dt(),
                exit_paths: job.n_paths(),
                max_steps: 10_000_000,
                shape,
            };
            let (rep, h) = verify::verify_h_consistency(spec, &cfg, seeds)?;
            vec![rep, estimate_report(spec, &h)]
        }
        ExcessiveInvariant => {
            let h = job.h(spec, seeds, HMethodChoice::Ladder)?;
            e.points
                .clone()
                .unwrap_or_else(|| vec![(1.0, 1.0), (0.5, 0.5)])
                .iter()
                .enumerate()
                .map(|(i, &(x, t))| {
                    check_excessive_invariant(spec, &h, x, t, job.dt(), job.n_paths(), &seeds.child(&format!("p-{i}")))
                })
                .collect::<Result<_>>()?
        }
        EntranceLaw => {
            let cfg = verify::EntranceConfig {
                t_large: e.t_large.unwrap_or(100.0),
                dt: job.dt(),
                n_samples: job.n_paths(),
                reference: e.entrance_reference.unwrap_or(EntranceReference::SizeBiased),
            };
            vec![verify::verify_entrance_law(spec, &cfg, seeds)?]
        }
        WeakConvergence => {
            let h = job.h(spec, seeds, HMethodChoice::Ladder)?;
            let reference = match e.limit.unwrap_or(LimitChoice::Bes3) {
                LimitChoice::Bes3 => LimitReference::Bes3,
                LimitChoice::LimitConstruction => LimitReference::LimitConstruction {
                    t_large: e.t_large.unwrap_or(100.0),
                    dt: job.dt(),
                    n_samples: e.n_limit.unwrap_or_else(|| job.n_paths()),
                },
            };
            let in_proof = e.in_proof_x.map(|x| {
                let thr = e.in_proof_threshold.unwrap_or(x);
                verify::InProofConfig {
                    x,
                    m_threshold: thr,
                    eta: thr,
                    sampler: job.sampler(x, *job.epsilons().last().unwrap_or(&0.01)),
                    n_samples: e.in_proof_paths.unwrap_or(2_000),
                    max_probability: 0.05,
                }
            });
            let n = job.n_paths();
            let cfg = verify::WeakConvergenceConfig {
                x_grid: e.x_grid.clone().unwrap_or_else(|| vec![0.8, 0.4, 0.2, 0.1]),
                t: e.t.unwrap_or(1.0),
                dt: job.dt(),
                n_eff_target: e.n_eff.unwrap_or(n as f64),
                batch: n.max(1),
                max_paths: e.max_paths.unwrap_or(100 * n),
                reference,
                trend_alpha: e.trend_alpha.unwrap_or(0.05),
                bridge_correction: e.bridge_correction.unwrap_or(false),
                in_proof,
            };
            vec![verify::verify_weak_convergence(spec, &h, &cfg, seeds)?]
        }
        ExcursionIdentity | EntranceAsymptotics => {
            let h = job.h(spec, seeds, HMethodChoice::Ladder)?;
            let t = e.t.unwrap_or(1.0);
            let cfg = verify::ExcursionIdentityConfig {
                t_values: e.t_values.clone().unwrap_or_else(|| vec![0.5, 1.0]),
                levels_a: e
                    .levels_a
                    .clone()
                    .unwrap_or_else(|| (1..=10).map(|i| i as f64 / 10.0).collect()),
                dt: job.dt(),
                path_horizon: job.horizon(),
                n_paths: job.n_paths(),
                t_large: e.t_large.unwrap_or(200.0),
                n_limit: e.n_limit.unwrap_or_else(|| job.n_paths()),
                max_residual: 0.10,
                k_stability: 0.10,
            };
            if e.kind()? == ExcursionIdentity {
                vec![verify::verify_excursion_identity(spec, &h, &cfg, seeds)?.0]
            } else {
                let fit = verify::fit_excursion_constant(spec, &h, t, &cfg, &seeds.child("fit"))?;
                let limit = verify::limit_marginal_sample(spec, t, cfg.t_large, cfg.dt, cfg.n_limit, &seeds.child("limit"))?;
                let acfg = verify::EntranceAsymptoticsConfig {
                    t,
                    x_grid: e.x_grid.clone().unwrap_or_else(|| vec![0.4, 0.2, 0.1, 0.05]),
                    dt: cfg.dt,
                    n_paths: cfg.n_paths,
                    tolerance: e.tolerance.unwrap_or(0.15),
                };
                vec![verify::verify_entrance_asymptotics(
                    spec,
                    &h,
                    &fit,
                    &limit,
                    None,
                    |y| (-y).exp(),
                    &acfg,
                    seeds,
                )?]
            }
        }
        Creeping => {
            let flags = crate::models::classify(spec)?;
            let h = if flags.creeps_upwards {
                Some(job.h(spec, seeds, HMethodChoice::Ladder)?)
            } else {
                None
            };
            let n = job.n_paths();
            let cfg = verify::CreepingConfig {
                x_grid: e
                    .x_grid
                    .clone()
                    .unwrap_or_else(|| (0..=5).map(|k| 2f64.powi(-k)).collect()),
                dt: job.dt(),
                n_paths: n,
                max_steps: e.max_steps.unwrap_or(50_000_000),
                tolerance_c: e.tolerance_c.unwrap_or(3.0),
                product_tolerance: e.tolerance.unwrap_or(0.10),
                min_creep_probability: 0.95,
                refine_factor: e.refine_factor.unwrap_or(4.0),
                passage_paths: e.n_passage.unwrap_or(n),
                passage_max_steps: 2_000_000,
                passage_t_large: e.t_large.unwrap_or(1.0),
                last_passage_samples: e.n_passage.unwrap_or(n),
            };
            vec![verify::verify_creeping_height(spec, h.as_ref(), &cfg, seeds)?]
        }
        LastPassage => {
            let cfg = verify::LastPassageConfig {
                x: e.x.unwrap_or(1.0),
                dt: job.dt(),
                t_large: e.t_large.unwrap_or(100.0),
                n_samples: job.n_paths(),
                max_steps: e.max_steps.unwrap_or(10_000_000),
                max_censored_fraction: 0.01,
            };
            vec![verify::verify_last_passage_identity(spec, &cfg, seeds)?]
        }
        Independence => {
            let lag = e.lag.unwrap_or(0.5);
            let mut sampler = job.sampler(e.x0.unwrap_or(1.0), *job.epsilons().last().unwrap_or(&0.01));
            sampler.horizon = lag;
            let cfg = verify::IndependenceConfig {
                sampler,
                n_samples: job.n_paths(),
                lag,
                permutations: e.permutations.unwrap_or(99),
            };
            vec![verify::verify_independence_pre_post(spec, &cfg, seeds)?]
        }
    };
    Ok(reports)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum JobStatus {
    Pass,
    Fail,
    Error,
}

/// Everything written for one test job.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct JobReport {
    pub name: String,
    pub kind: JobKind,
    pub model: String,
    pub seed: u64,
    pub status: JobStatus,
    pub error: Option<String>,
    pub reports: Vec<TestReport>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IndexEntry {
    pub name: String,
    pub kind: JobKind,
    pub model: String,
    pub status: JobStatus,
    pub report_file: String,
    pub summary: Vec<String>,
    pub error: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SuiteIndex {
    pub seed: u64,
    pub passed: usize,
    pub failed: usize,
    pub errored: usize,
    pub entries: Vec<IndexEntry>,
}

impl SuiteIndex {
    pub fn all_passed(&self) -> bool {
        self.failed == 0 && self.errored == 0
    }
}

fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let mut s = serde_json::to_string_pretty(value)?;
    s.push('\n');
    fs::write(path, s)?;
    Ok(())
}

fn write_table(path: &Path, table: &Table) -> Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    w.write_record(&table.columns)?;
    for row in &table.rows {
        w.write_record(row.iter().map(|v| v.to_string()))?;
    }
    w.flush()?;
    Ok(())
}

/// Run `f` on a worker pool of `threads` threads (0 = one per core).
pub fn install<T: Send>(threads: usize, f: impl FnOnce() -> T + Send) -> Result<T> {
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(threads)
        .build()
        .map_err(|e| Error::Config(format!("thread pool: {e}")))?;
    Ok(pool.install(f))
}

/// Run every selected job, writing `<name>.json` (plus `<name>-<i>.csv` for
/// each report table) as each finishes and `index.json` at the end.
pub fn run_suite(config: &ExperimentConfig) -> Result<SuiteIndex> {
    let selected = config.selection()?;
    let mut specs = BTreeMap::new();
    for e in &selected {
        specs.insert(e.model.clone(), config.model(&e.model)?);
        e.stray_keys()?;
    }
    fs::create_dir_all(&config.output_dir)?;
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(config.threads)
        .build()
        .map_err(|e| Error::Config(format!("thread pool: {e}")))?;
    let mut index = SuiteIndex {
        seed: config.seed,
        passed: 0,
        failed: 0,
        errored: 0,
        entries: Vec::new(),
    };
    for entry in selected {
        let spec = &specs[&entry.model];
        let seeds = SeedStream::new(config.seed, &entry.name);
        let job = Job {
            entry,
            defaults: &config.defaults,
        };
        log::info!("running {} ({:?}) on {}", entry.name, entry.kind, spec.label);
        let outcome = pool.install(|| run_job(spec, &job, &seeds));
        let (status, error, reports) = match outcome {
            Ok(reports) => {
                let ok = !reports.is_empty() && reports.iter().all(|r| r.passed);
                (if ok { JobStatus::Pass } else { JobStatus::Fail }, None, reports)
            }
            Err(e) => (JobStatus::Error, Some(e.to_string()), Vec::new()),
        };
        match status {
            JobStatus::Pass => index.passed += 1,
            JobStatus::Fail => index.failed += 1,
            JobStatus::Error => index.errored += 1,
        }
        let file = format!("{}.json", entry.name);
        for (i, r) in reports.iter().enumerate() {
            if let Some(t) = &r.table {
                write_table(&config.output_dir.join(format!("{}-{i}.csv", entry.name)), t)?;
            }
        }
        let kind = entry.kind()?;
        let job_report = JobReport {
            name: entry.name.clone(),
            kind,
            model: entry.model.clone(),
            seed: seeds.seed(),
            status,
            error: error.clone(),
            reports,
        };
        write_json(&config.output_dir.join(&file), &job_report)?;
        index.entries.push(IndexEntry {
            name: entry.name.clone(),
            kind,
            model: entry.model.clone(),
            status,
            report_file: file,
            summary: job_report.reports.iter().map(TestReport::summary_line).collect(),
            error,
        });
    }
    write_json(&config.output_dir.join("index.json"), &index)?;
    Ok(index)
}

/// Files written by [`emit_plot_data`].
#[derive(Debug, Clone, Default, PartialEq)]
pub struct PlotBundle {
    pub files: Vec<PathBuf>,
    pub warnings: Vec<String>,
}

fn num(v: &Value) -> f64 {
    v.as_f64().unwrap_or(f64::NAN)
}

/// Tidy CSVs from job report files:
/// `h_estimates.csv` (level,value,stderr,method),
/// `creeping.csv` (x,n_H_gt_x,h_x,product,ci_lo,ci_hi) and
/// `curves.csv` (test,model,x,statistic,value) for every other table.
pub fn emit_plot_data(report_files: &[PathBuf], out_dir: &Path) -> Result<PlotBundle> {
    let missing: Vec<String> = report_files
        .iter()
        .filter(|p| !p.is_file())
        .map(|p| p.display().to_string())
        .collect();
    if !missing.is_empty() {
        return Err(Error::Config(format!("missing report files: {}", missing.join(", "))));
    }
    let mut bundle = PlotBundle::default();
    if report_files.is_empty() {
        bundle.warnings.push("no report files given; nothing written".into());
        return Ok(bundle);
    }
    let mut h_rows = Vec::new();
    let mut creep_rows = Vec::new();
    let mut curve_rows = Vec::new();
    for path in report_files {
        let v: Value = serde_json::from_str(&fs::read_to_string(path)?)?;
        let reports: Vec<&Value> = match v.get("reports") {
            Some(Value::Array(a)) => a.iter().collect(),
            _ if v.get("test_name").is_some() => vec![&v],
            _ => {
                bundle.warnings.push(format!("{}: not a report file, skipped", path.display()));
                continue;
            }
        };
        for r in reports {
            let name = r["test_name"].as_str().unwrap_or("");
            let model = r["model_label"].as_str().unwrap_or("").to_string();
            let Some(table) = r.get("table").filter(|t| !t.is_null()) else { continue };
            let cols: Vec<&str> = table["columns"]
                .as_array()
                .map(|a| a.iter().filter_map(Value::as_str).collect())
                .unwrap_or_default();
            let rows: Vec<Vec<f64>> = table["rows"]
                .as_array()
                .map(|a| {
                    a.iter()
                        .map(|row| row.as_array().map(|c| c.iter().map(num).collect()).unwrap_or_default())
                        .collect()
                })
                .unwrap_or_default();
            let col = |row: &[f64], c: &str| cols.iter().position(|k| *k == c).map_or(f64::NAN, |i| row[i]);
            match name {
                "harmonic_estimate" => {
                    let method = r["parameters"]["method"].as_str().unwrap_or("").to_string();
                    for row in &rows {
                        h_rows.push((col(row, "level"), col(row, "value"), col(row, "stderr"), method.clone()));
                    }
                }
                "creeping_height" => {
                    for row in &rows {
                        creep_rows.push(
                            ["x", "n_H_gt_x", "h_x", "product", "ci_lo", "ci_hi"].map(|c| col(row, c)),
                        );
                    }
                }
                _ => {
                    for row in &rows {
                        for (j, c) in cols.iter().enumerate().skip(1) {
                            curve_rows.push((name.to_string(), model.clone(), row[0], c.to_string(), row[j]));
                        }
                    }
                }
            }
        }
    }
    fs::create_dir_all(out_dir)?;
    if !h_rows.is_empty() {
        let p = out_dir.join("h_estimates.csv");
        let mut w = csv::Writer::from_path(&p)?;
        w.write_record(["level", "value", "stderr", "method"])?;
        for (l, v, s, m) in &h_rows {
            w.write_record([l.to_string(), v.to_string(), s.to_string(), m.clone()])?;
        }
        w.flush()?;
        bundle.files.push(p);
    }
    if !creep_rows.is_empty() {
        let p = out_dir.join("creeping.csv");
        let mut w = csv::Writer::from_path(&p)?;
        w.write_record(["x", "n_H_gt_x", "h_x", "product", "ci_lo", "ci_hi"])?;
        for row in &creep_rows {
            w.write_record(row.iter().map(|v| v.to_string()))?;
        }
        w.flush()?;
        bundle.files.push(p);
    }
    if !curve_rows.is_empty() {
        let p = out_dir.join("curves.csv");
        let mut w = csv::Writer::from_path(&p)?;
        w.write_record(["test", "model", "x", "statistic", "value"])?;
        for (t, m, x, s, v) in &curve_rows {
            w.write_record([t.clone(), m.clone(), x.to_string(), s.clone(), v.to_string()])?;
        }
        w.flush()?;
        bundle.files.push(p);
    }
    Ok(bundle)
}

/// Pass rate of each statistical test on data it should accept, over
/// `repetitions` seeds; every rate must reach `min_rate`.
pub fn null_calibration(repetitions: u64, min_rate: f64, seeds: &SeedStream) -> Result<TestReport> {
    type Trial = fn(&mut crate::rng::SimRng) -> bool;
    let z = normal_quantile_two_sided(ALPHA);
    let trials: Vec<(&str, Trial)> = vec![
        ("ks_one_sample", |rng| {
            let s: Vec<f64> = (0..2_000).map(|_| rng.random::<f64>()).collect();
            ks_one_sample(&EmpiricalDistribution::new(s), |x| x.clamp(0.0, 1.0), ALPHA).passed
        }),
        ("ks_two_sample", |rng| {
            let a: Vec<f64> = (0..2_000).map(|_| rng.random::<f64>()).collect();
            let b: Vec<f64> = (0..1_500).map(|_| rng.random::<f64>()).collect();
            ks_two_sample(&EmpiricalDistribution::new(a), &EmpiricalDistribution::new(b), ALPHA).passed
        }),
        ("ks_weighted", |rng| {
            // Exp(1) draws reweighted to Exp(2)
            let s: Vec<f64> = (0..4_000).map(|_| Exp1.sample(rng)).collect();
            let w: Vec<f64> = s.iter().map(|x| (-x).exp()).collect();
            ks_one_sample(&EmpiricalDistribution::weighted(s, w), |x| 1.0 - (-2.0 * x).exp(), ALPHA).passed
        }),
        ("ks_two_sample_weighted", |rng| {
            let s: Vec<f64> = (0..4_000).map(|_| Exp1.sample(rng)).collect();
            let w: Vec<f64> = s.iter().map(|x| (-x).exp()).collect();
            let b: Vec<f64> = (0..2_000).map(|_| { let e: f64 = Exp1.sample(rng); e / 2.0 }).collect();
            ks_two_sample(&EmpiricalDistribution::weighted(s, w), &EmpiricalDistribution::new(b), ALPHA).passed
        }),
        ("dcor_independence", |rng| {
            let x: Vec<f64> = (0..150).map(|_| StandardNormal.sample(rng)).collect();
            let u: Vec<f64> = (0..150).map(|_| rng.random::<f64>()).collect();
            let y: Vec<f64> = (0..150).map(|_| Exp1.sample(rng)).collect();
            distance_correlation_test(&[x, u], &[y], 99, ALPHA, rng).passed
        }),
        ("spearman_decreasing", |rng| {
            // noisy version of a distance sequence shrinking like x^2
            let v: Vec<f64> = [0.8f64, 0.4, 0.2, 0.1]
                .iter()
                .map(|x| 0.15 * x * x + 0.002 * rng.random::<f64>())
                .collect();
            spearman_decreasing(&v, 0.05).passed
        }),
        ("wilson_interval", |rng| {
            let n = 1_000u64;
            let s = (0..n).filter(|_| rng.random::<f64>() < 0.3).count() as u64;
            let (lo, hi) = wilson_interval(s, n, normal_quantile_two_sided(ALPHA));
            (lo..=hi).contains(&0.3)
        }),
    ];
    let mut rep = TestReport::new("null_calibration", "synthetic");
    rep.param("repetitions", repetitions).param("min_rate", min_rate).param("z", z);
    rep.seeds.push(seeds.seed());
    let mut table = Table::new(&["test_index", "pass_rate"]);
    for (i, (name, trial)) in trials.iter().enumerate() {
        let s = seeds.child(name);
        let passes = (0..repetitions).filter(|&r| trial(&mut s.rng(r))).count();
        let rate = passes as f64 / repetitions as f64;
        rep.push_check(Check::at_least(format!("{name}_pass_rate"), rate, min_rate));
        table.push(vec![i as f64, rate]);
        rep.n_samples += repetitions;
    }
    rep.table = Some(table);
    rep.finish();
    Ok(rep)
}

#[cfg(test)]
mod tests {
    use super::*;

    const MINIMAL: &str = r#"
seed = 7
output_dir = "out"

[[model]]
label = "bm"
family = "brownian_with_drift"
sigma = 1.0
"#;

    #[test]
    fn seed_is_mandatory() {
        let err = ExperimentConfig::parse("output_dir = \"o\"\n").unwrap_err();
        assert!(err.to_string().contains("seed"));
    }

    #[test]
    fn unknown_keys_are_rejected() {
        let src = format!("{MINIMAL}\nbogus = 1\n");
        assert!(ExperimentConfig::parse(&src).is_err());
        let src = format!("{MINIMAL}\n[[test]]\nname = \"a\"\nkind = \"min_law\"\nmodel = \"bm\"\nwhatever = 2\n");
        assert!(ExperimentConfig::parse(&src).is_err());
    }

    #[test]
    fn unknown_label_reports_line() {
        let src = format!("{MINIMAL}\n[[test]]\nname = \"a\"\nkind = \"min_law\"\nmodel = \"nope\"\n");
        let err = ExperimentConfig::parse(&src).unwrap_err().to_string();
        assert!(err.contains("unknown model `nope`"), "{err}");
        assert!(err.contains("line 10"), "{err}");
    }

    #[test]
    fn keys_foreign_to_the_kind_are_rejected() {
        let src = format!("{MINIMAL}\n[[test]]\nname = \"a\"\nkind = \"min_law\"\nmodel = \"bm\"\npermutations = 9\n");
        let err = ExperimentConfig::parse(&src).unwrap_err().to_string();
        assert!(err.contains("permutations"), "{err}");
    }

    #[test]
    fn model_fields_are_checked_per_family() {
        let src = "seed = 1\noutput_dir = \"o\"\n[[model]]\nlabel = \"m\"\nfamily = \"stable\"\nalpha = 1.5\nsigma = 1.0\n";
        let err = ExperimentConfig::parse(src).unwrap_err().to_string();
        assert!(err.contains("sigma"), "{err}");
        let src = "seed = 1\noutput_dir = \"o\"\n[[model]]\nlabel = \"m\"\nfamily = \"stable\"\nalpha = 1.0\nbeta = 1.0\n";
        assert!(ExperimentConfig::parse(src).is_err());
    }

    #[test]
    fn jump_law_parses_inline() {
        let src = "seed = 1\noutput_dir = \"o\"\n[[model]]\nlabel = \"sp\"\nfamily = \"spectrally_positive_cp_drift\"\ndrift = -0.5\njump_rate = 1.0\njump_law = { kind = \"exponential\", rate = 1.0 }\n";
        let cfg = ExperimentConfig::parse(src).unwrap();
        assert!(matches!(
            cfg.model("sp").unwrap().family,
            ModelFamily::SpectrallyPositiveCpDrift { .. }
        ));
    }

    #[test]
    fn default_suite_round_trips_through_toml() {
        let cfg = ExperimentConfig::default_bm_suite(42, 1);
        let text = cfg.to_toml().unwrap();
        assert_eq!(ExperimentConfig::parse(&text).unwrap(), cfg);
    }

    #[test]
    fn empty_selection_writes_empty_index() {
        let dir = tempfile::tempdir().unwrap();
        let mut cfg = ExperimentConfig::parse(MINIMAL).unwrap();
        cfg.output_dir = dir.path().to_path_buf();
        let index = run_suite(&cfg).unwrap();
        assert!(index.all_passed());
        assert!(index.entries.is_empty());
        let text = fs::read_to_string(dir.path().join("index.json")).unwrap();
        assert!(text.contains("\"entries\": []"));
    }

    #[test]
    fn overrides_win() {
        let mut cfg = ExperimentConfig::default_bm_suite(1, 1);
        cfg.apply(&Overrides {
            seed: Some(9),
            dt: Some(0.02),
            ..Overrides::default()
        })
        .unwrap();
        assert_eq!(cfg.seed, 9);
        assert!(cfg.test_entries.iter().all(|t| t.dt == Some(0.02)));
        let bad = Overrides {
            tests: Some(vec!["missing".into()]),
            ..Overrides::default()
        };
        assert!(cfg.apply(&bad).is_err());
    }

    #[test]
    fn emit_plot_data_without_reports_warns() {
        let dir = tempfile::tempdir().unwrap();
        let b = emit_plot_data(&[], dir.path()).unwrap();
        assert!(b.files.is_empty());
        assert_eq!(b.warnings.len(), 1);
        assert!(emit_plot_data(&[dir.path().join("nope.json")], dir.path()).is_err());
    }
}
