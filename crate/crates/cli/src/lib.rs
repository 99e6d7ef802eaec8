//! Configuration, file formats and commands behind the `roamscope` binary.

pub mod commands;
pub mod config;
pub mod error;
pub mod formats;

pub use commands::{run, Command, Outputs};
pub use config::{Overrides, RawConfig, RunConfig};
pub use error::{CliError, CliResult};
