//! Configuration, presets and commands behind the `tm` binary.

pub mod commands;
pub mod config;
pub mod error;
pub mod output;

pub use commands::{cmd_analyze, cmd_eigs, cmd_nondim, cmd_simulate};
pub use config::Config;
pub use error::CliError;
