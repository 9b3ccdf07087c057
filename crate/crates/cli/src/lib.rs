//! Experiment driver for tensor-train cross tomography: generate target
//! states, reconstruct them from simulated measurements, sweep qubit counts,
//! refine reconstructions and compare states. All tabular output is CSV.

pub mod args;
pub mod commands;
pub mod config;
pub mod error;
pub mod record;

pub use config::{RunConfig, TargetSpec};
pub use error::{CliError, Result};
pub use record::{RefineRecord, RunRecord};
