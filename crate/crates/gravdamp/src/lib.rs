//! Command-line companion to `gravdamp-core`: scenario files, runners and
//! table output.

pub mod checks;
pub mod config;
pub mod error;
pub mod scenario;
pub mod table;

pub use config::{Format, ScenarioConfig, Subcommand};
pub use error::{CliError, Result};
pub use scenario::{run, Report, RunOptions};
