//! Monte Carlo link-budget simulation of indoor 5G coverage methods: outdoor
//! macro cell, indoor small cell, layer-1 repeater, layer-3 relay and the
//! mmWave bridge.

pub mod capacity;
pub mod engine;
pub mod error;
pub mod linkmodels;
pub mod propagation;
pub mod rfmath;
pub mod scenario;

pub use engine::{run_experiment, sweep, ExperimentConfig, ExperimentResult};
pub use error::{ConfigError, SimError};
