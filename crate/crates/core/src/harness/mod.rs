//! Experiment orchestration: configuration, data ensembles, runs and the
//! acceptance suite.

pub mod config;
pub mod ensemble;
pub mod run;
pub mod suite;

pub use config::{Estimate, ExperimentConfig};
pub use run::{run, RunError, RunReport};
