//! Configuration and experiment recipes of the `tli` command-line tool.

pub mod commands;
pub mod config;

pub use commands::{run_command, Cell, Command, Table};
pub use config::{parse_config, ConfigError, RunConfig};
