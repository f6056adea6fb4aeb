//! Command-line front end for the dissipation routes in `cfl-core`.

pub mod config;
pub mod error;
pub mod experiments;
pub mod golden;
pub mod output;

pub use config::{Experiment, ExperimentConfig, RawConfig};
pub use error::{CliError, CliResult};
