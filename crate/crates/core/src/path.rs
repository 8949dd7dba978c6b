//! Grid skeletons and the path functionals used throughout: running extrema,
//! the (last) time of the minimum, first and last passages, reflection at the
//! infimum and the excursions of the reflected path.
//!
//! A path is only ever looked at on its grid: `X_{k dt} = values[k]`.

use std::io::Write;
use std::path::Path;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{ensure_finite, ensure_positive, Error, Result};
use crate::models::{IncrementSampler, LevyModelSpec};

/// Default cap on the number of grid points of a single simulated path.
pub const DEFAULT_MAX_POINTS: usize = 20_000_000;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GridPath {
    pub dt: f64,
    pub values: Vec<f64>,
    /// Lifetime in grid units: points at index `>= killed_at` are dead.
    pub killed_at: Option<usize>,
    pub label: String,
}

/// Which set a first passage enters.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Side {
    /// `(-inf, barrier)`
    BelowStrict,
    /// `[barrier, inf)`
    AtOrAbove,
    /// `(barrier, inf)`
    AboveStrict,
}

impl Side {
    #[inline]
    pub fn contains(self, barrier: f64, v: f64) -> bool {
        match self {
            Side::BelowStrict => v < barrier,
            Side::AtOrAbove => v >= barrier,
            Side::AboveStrict => v > barrier,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ExcursionRecord {
    /// New-minimum epoch at which the excursion leaves 0.
    pub start_index: usize,
    /// Next new-minimum epoch, or the path length if censored.
    pub end_index: usize,
    pub length: f64,
    pub height: f64,
    pub censored: bool,
}

impl GridPath {
    pub fn new(dt: f64, values: Vec<f64>, label: impl Into<String>) -> Result<Self> {
        ensure_positive("dt", dt)?;
        if values.is_empty() {
            return Err(Error::Degenerate("a path needs at least one point".into()));
        }
        Ok(Self {
            dt,
            values,
            killed_at: None,
            label: label.into(),
        })
    }

    pub fn with_killing(mut self, killed_at: Option<usize>) -> Self {
        self.killed_at = killed_at.map(|k| k.min(self.values.len()));
        self
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    /// Values on `[0, zeta)`.
    pub fn live(&self) -> &[f64] {
        match self.killed_at {
            Some(k) => &self.values[..k],
            None => &self.values,
        }
    }

    pub fn time(&self, index: usize) -> f64 {
        index as f64 * self.dt
    }

    /// Pointwise running `(sup, inf)`.
    pub fn running_extrema(&self) -> (Vec<f64>, Vec<f64>) {
        let v = self.live();
        let mut sup = Vec::with_capacity(v.len());
        let mut inf = Vec::with_capacity(v.len());
        let (mut hi, mut lo) = (f64::NEG_INFINITY, f64::INFINITY);
        for &x in v {
            hi = hi.max(x);
            lo = lo.min(x);
            sup.push(hi);
            inf.push(lo);
        }
        (sup, inf)
    }

    /// Last index attaining the minimum over the lifetime.
    pub fn argmin_time(&self) -> usize {
        argmin_last(self.live())
    }

    /// First index `>= 1` whose value lies in the set.
    pub fn first_passage(&self, barrier: f64, side: Side) -> Option<usize> {
        first_passage(self.live(), barrier, side)
    }

    /// Last index with value `<= x`.
    pub fn last_passage(&self, x: f64) -> Option<usize> {
        self.live().iter().rposition(|&v| v <= x)
    }

    pub fn reflect_at_infimum(&self) -> GridPath {
        let v = self.live();
        let mut lo = f64::INFINITY;
        let values = v
            .iter()
            .map(|&x| {
                lo = lo.min(x);
                x - lo
            })
            .collect();
        GridPath {
            dt: self.dt,
            values,
            killed_at: None,
            label: self.label.clone(),
        }
    }

    pub fn extract_excursions(&self) -> Vec<ExcursionRecord> {
        extract_excursions(self.live(), self.dt)
    }

    /// Number of new-minimum epochs (epoch 0 included).
    pub fn new_minimum_epochs(&self) -> usize {
        let mut lo = f64::INFINITY;
        self.live()
            .iter()
            .filter(|&&x| {
                let hit = x <= lo;
                lo = lo.min(x);
                hit
            })
            .count()
    }

    pub fn write_csv(&self, path: &Path) -> Result<()> {
        let mut w = csv::Writer::from_path(path)?;
        w.write_record(["time", "value"])?;
        for (k, v) in self.live().iter().enumerate() {
            w.write_record([self.time(k).to_string(), v.to_string()])?;
        }
        w.flush()?;
        Ok(())
    }

    pub fn write_csv_to<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record(["time", "value"])?;
        for (k, v) in self.live().iter().enumerate() {
            w.write_record([self.time(k).to_string(), v.to_string()])?;
        }
        w.flush()?;
        Ok(())
    }
}

pub fn argmin_last(values: &[f64]) -> usize {
    let mut best = 0;
    for (k, &v) in values.iter().enumerate() {
        if v <= values[best] {
            best = k;
        }
    }
    best
}

pub fn first_passage(values: &[f64], barrier: f64, side: Side) -> Option<usize> {
    values
        .iter()
        .enumerate()
        .skip(1)
        .find(|&(_, &v)| side.contains(barrier, v))
        .map(|(k, _)| k)
}

/// Excursions of `values - running_inf` away from 0, delimited by new-minimum
/// epochs (indices where the value is `<=` every earlier value).
pub fn extract_excursions(values: &[f64], dt: f64) -> Vec<ExcursionRecord> {
    let mut out = Vec::new();
    if values.is_empty() {
        return out;
    }
    let mut lo = values[0];
    let mut start = 0usize;
    let mut height = 0.0f64;
    for (k, &x) in values.iter().enumerate().skip(1) {
        if x <= lo {
            if k > start + 1 {
                out.push(ExcursionRecord {
                    start_index: start,
                    end_index: k,
                    length: (k - start) as f64 * dt,
                    height,
                    censored: false,
                });
            }
            lo = x;
            start = k;
            height = 0.0;
        } else {
            height = height.max(x - lo);
        }
    }
    let n = values.len();
    if n > start + 1 {
        out.push(ExcursionRecord {
            start_index: start,
            end_index: n,
            length: (n - start) as f64 * dt,
            height,
            censored: true,
        });
    }
    out
}

/// Simulate a skeleton started at `x0` on `[0, horizon]`.
pub fn simulate_path<R: Rng + ?Sized>(
    spec: &LevyModelSpec,
    x0: f64,
    dt: f64,
    horizon: f64,
    rng: &mut R,
) -> Result<GridPath> {
    simulate_path_capped(spec, x0, dt, horizon, DEFAULT_MAX_POINTS, rng)
}

pub fn simulate_path_capped<R: Rng + ?Sized>(
    spec: &LevyModelSpec,
    x0: f64,
    dt: f64,
    horizon: f64,
    max_points: usize,
    rng: &mut R,
) -> Result<GridPath> {
    ensure_finite("x0", x0)?;
    ensure_positive("dt", dt)?;
    if !(horizon >= dt) {
        return Err(Error::InvalidParameter {
            name: "horizon",
            value: horizon,
            constraint: format!("must be >= dt = {dt}"),
        });
    }
    let steps = grid_steps(horizon, dt);
    let len = steps + 1;
    if len > max_points {
        return Err(Error::PathTooLong {
            requested: len,
            cap: max_points,
        });
    }
    let sampler = IncrementSampler::new(spec, dt)?;
    let mut values = Vec::with_capacity(len);
    let mut x = x0;
    values.push(x);
    for _ in 0..steps {
        x += sampler.sample(rng);
        values.push(x);
    }
    Ok(GridPath {
        dt,
        values,
        killed_at: None,
        label: spec.label.clone(),
    })
}

/// `floor(horizon / dt)`, tolerant of representation error (0.3/0.1 is 3 steps).
pub fn grid_steps(horizon: f64, dt: f64) -> usize {
    let r = horizon / dt;
    let n = r.round();
    if (r - n).abs() < 1e-9 * r.max(1.0) {
        n as usize
    } else {
        r.floor() as usize
    }
}
