//! Experiment driver for time-distributed MPC: config parsing, the
//! command implementations, and a small SVG emitter.

pub mod commands;
pub mod config;
pub mod error;
pub mod svg;

pub use commands::{OutputOptions, RunTarget, Setup};
pub use config::ExperimentConfig;
pub use error::CliError;
