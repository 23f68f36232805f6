//! Variational Bayesian line spectral estimation from multiple measurement
//! vectors sharing one set of frequencies.
//!
//! The [`engine`] runs the batch estimator. [`parallel`] splits the
//! per-iteration work across snapshots, [`sequential`] processes snapshot
//! groups in turn and hands posteriors forward as priors. [`bench`] holds
//! the simulation scenarios and error metrics.

pub mod bench;
pub mod circular;
pub mod engine;
pub mod error;
pub mod exec;
pub mod model;
pub mod parallel;
pub mod sequential;

pub use circular::VonMises;
pub use engine::{run, Options};
pub use error::{Error, Result};
pub use exec::Executor;
pub use model::{Estimate, HyperParams, MeasurementSet, PriorConfig, PriorMatching};
pub use parallel::run_parallel;
pub use sequential::{partition, run_sequential, GroupPlan, SequentialOptions};
