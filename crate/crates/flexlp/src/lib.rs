//! File formats, persistence and the `flexlp` command line on top of
//! `flexlp-core`.

pub mod cli;
pub mod commands;
pub mod config;
pub mod error;
pub mod formats;
pub mod io;
pub mod manifest;
pub mod paths;

pub use error::{CliError, Result};
