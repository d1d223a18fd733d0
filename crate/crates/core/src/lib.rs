//! Prototype-based online learning by deterministic annealing over Bregman
//! divergences, together with the reference baselines (stochastic VQ,
//! k-means, batch annealing), dataset tooling, and a cross-validation
//! benchmark harness.
//!
//! The learner grows its codebook on its own: training sweeps a temperature
//! parameter downward, and prototypes split only when the data supports more
//! structure at the current scale. Updates are online, gradient-free
//! stochastic approximations, so a model can be trained from a sample stream
//! without ever materializing the dataset.

pub mod annealing;
pub mod baselines;
pub mod data;
pub mod divergence;
pub mod error;
pub mod harness;
pub mod metrics;
pub mod report;

pub use annealing::{OdaConfig, OdaModel, TemperatureSchedule};
pub use data::Dataset;
pub use divergence::{Divergence, DivergenceKind};
pub use error::{OdaError, Result};
pub use report::{LevelRecord, RunReport};
