//! File formats and the command-line driver for the viscous fingering
//! simulator.

pub mod cli;
pub mod config;
pub mod io;

pub use cli::run_cli;
pub use config::{parse_config, render_config, ConfigError, ParsedConfig};
