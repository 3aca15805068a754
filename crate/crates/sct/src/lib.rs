//! File formats, run configuration, experiments and the command-line front
//! end built on `sct-core`.

pub mod cli;
pub mod config;
pub mod error;
pub mod experiments;
pub mod formats;

pub use error::{CliError, Result};
