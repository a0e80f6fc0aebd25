//! Command surface of the `padenet` binary: experiment configuration and the
//! subcommands that tie the pipeline, model and training together.

pub mod commands;
pub mod config;

pub use commands::{dispatch, Cli};
pub use config::{DataConfig, DataSource, ExperimentConfig, OutputConfig};
