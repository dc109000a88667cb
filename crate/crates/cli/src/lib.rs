//! Command-line front end: CSV ingestion, configuration and the `dlfpca` subcommands.

pub mod commands;
pub mod config;
pub mod io;

pub use commands::{run, Cli, Command, Outputs};
