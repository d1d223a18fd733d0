//! Online deterministic annealing: progressively-growing prototype learner
//! for clustering and classification.

mod config;
mod model;

pub use config::{derive_seed, OdaConfig, TemperatureSchedule};
pub use model::{
    sa_update, stepsize, Codevector, EffectiveCodevector, LevelTransition, ModelFile, OdaModel,
    MODEL_FORMAT_VERSION,
};
