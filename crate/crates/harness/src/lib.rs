//! Experiment harness for `stochq`: run configuration, training runs with
//! per-step curve files, analysis reports, the selection-time benchmark and
//! curve summarization. The `stochq` binary exposes each as a subcommand.

pub mod analyze;
pub mod bench;
pub mod config;
pub mod curve;
mod error;
pub mod runner;
pub mod summarize;

pub use error::{HarnessError, Result};
