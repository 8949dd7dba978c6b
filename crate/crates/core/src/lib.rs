//! Simulation and verification toolkit for Lévy processes conditioned to stay
//! positive.
//!
//! The crate is organised bottom-up:
//!
//! * [`models`]: model families, exact increments, regularity classification;
//! * [`path`]: grid skeletons and their functionals (extrema, excursions, passages);
//! * [`harmonic`]: the harmonic function `h` (closed forms and two estimators);
//! * [`conditioning`]: samplers for the conditioned law and its limit from 0;
//! * [`stats`] and [`verify`]: statistical tests and the named identity checks;
//! * [`harness`]: TOML experiment configs, suite orchestration, plot data.

pub mod conditioning;
pub mod error;
pub mod harmonic;
pub mod harness;
pub mod models;
pub mod path;
pub mod rng;
pub mod stats;
pub mod verify;

pub use error::{Error, Result};
pub use models::{classify, JumpLaw, LevyModelSpec, ModelFamily, RegularityFlags};
pub use rng::SeedStream;
