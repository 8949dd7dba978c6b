use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid model `{label}`: {reason}")]
    InvalidModel { label: String, reason: String },

    #[error("invalid parameter `{name}` = {value}: {constraint}")]
    InvalidParameter {
        name: &'static str,
        value: f64,
        constraint: String,
    },

    #[error("path length {requested} exceeds the configured cap of {cap} grid points")]
    PathTooLong { requested: usize, cap: usize },

    #[error("level {level} is outside the harmonic estimate range [0, {max}]")]
    HarmonicRange { level: f64, max: f64 },

    #[error("rejection sampler gave up after {attempts} attempts (acceptance rate {rate:.3e})")]
    RejectionExhausted { attempts: u64, rate: f64 },

    #[error("degenerate estimate: {0}")]
    Degenerate(String),

    #[error("model `{label}` is outside the validity class: {reason}")]
    OutsideValidity { label: String, reason: String },

    #[error("config error: {0}")]
    Config(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn ensure_positive(name: &'static str, value: f64) -> Result<()> {
    if value.is_finite() && value > 0.0 {
        Ok(())
    } else {
        Err(Error::InvalidParameter {
            name,
            value,
            constraint: "must be finite and > 0".into(),
        })
    }
}

pub(crate) fn ensure_finite(name: &'static str, value: f64) -> Result<()> {
    if value.is_finite() {
        Ok(())
    } else {
        Err(Error::InvalidParameter {
            name,
            value,
            constraint: "must be finite".into(),
        })
    }
}
