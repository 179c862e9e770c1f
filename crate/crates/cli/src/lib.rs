//! Scenario loading, subcommands and output formatting for the `sweep`
//! binary.

pub mod commands;
pub mod error;
pub mod output;
pub mod scenario;

pub use error::CliError;
pub use scenario::Scenario;
