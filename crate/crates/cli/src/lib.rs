//! Command-line front end for the `qwsim` simulator: configuration files,
//! the `evolve`, `sweep`, `analyze` and `check` commands and their CSV output.

pub mod commands;
pub mod config;

pub use commands::{cmd_analyze, cmd_check, cmd_evolve, cmd_sweep, CheckReport, Output, RunError};
pub use config::{load_config, parse_config, serialize, Command, ConfigError, RunConfig};
