//! Experiment harness: configuration, sweeps, protocol comparisons,
//! validation suites and route tracing on top of the `selroute` crate.

pub mod commands;
pub mod config;
pub mod error;
pub mod table;

pub use commands::{resolve, run, Command, RunOutput};
pub use config::ExperimentConfig;
pub use error::{CliError, Result};
pub use table::{Cell, ResultTable};
