//! File formats, configuration, synthetic data and the command entry points
//! behind the `ltd` binary.

pub mod commands;
pub mod config;
pub mod error;
pub mod io;
pub mod synth;

pub use error::{CliError, Result};
