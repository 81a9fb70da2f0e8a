//! Configuration, file formats and subcommands on top of `mfg-torus-core`.

pub mod commands;
pub mod config;
pub mod error;
pub mod io;

pub use config::RunConfig;
pub use error::{CliError, Result};
