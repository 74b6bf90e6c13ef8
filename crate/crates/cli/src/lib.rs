//! Command-line orchestration of the sense embedding pipeline.

pub mod cli;
pub mod commands;
pub mod config;
pub mod error;
pub mod manifest;

pub use cli::{run, Cli};
pub use error::CliError;
