//! File formats and command implementations for the `soma` tool.

pub mod checkpoint;
pub mod commands;
pub mod config;
pub mod error;
mod fsutil;
pub mod report;

pub use checkpoint::{Checkpoint, CheckpointError, Tensor};
pub use error::{exit, CliError, CliResult};
pub use fsutil::write_atomic;
