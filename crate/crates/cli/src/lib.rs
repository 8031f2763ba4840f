//! The `sagaze` command line: synthesis, preprocessing, metrics, graphs,
//! training and evaluation.

pub mod args;
pub mod commands;
pub mod config;
pub mod error;

pub use args::Cli;
pub use commands::run;
pub use config::RunConfig;
pub use error::CliError;
