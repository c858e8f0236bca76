//! Command-line front end and annotation service for the `cotag` library.

pub mod artifacts;
pub mod checkpoint;
pub mod commands;
pub mod config;
pub mod error;
pub mod service;

pub use commands::{run, Cli};
pub use error::{CliError, CliResult};
