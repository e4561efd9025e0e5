//! Batch front end for `homspec`: TOML experiment configs, self-describing
//! CSV and JSON artifacts, and the `model`, `simulate`, `fit`, `beat` and
//! `compare` commands.

pub mod app;
pub mod commands;
pub mod config;
pub mod error;
pub mod formats;

pub use app::{main_with, run, Cli};
pub use config::ExperimentConfig;
pub use error::{CliError, CliResult};
