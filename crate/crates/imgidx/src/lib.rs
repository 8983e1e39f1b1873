//! File formats, experiment orchestration and the `imgidx` command line on
//! top of `imgidx-core`.

pub mod canon;
pub mod checkpoint;
pub mod commands;
pub mod config;
pub mod error;
pub mod manifest;
pub mod results;

pub use error::{CliError, Result};
