//! Batch runner for the oversampling pipeline: `train`, `generate`,
//! `evaluate` and `sweep` over a JSON run config.

pub mod commands;
pub mod config;
pub mod error;
mod lock;

pub use commands::{cmd_evaluate, cmd_generate, cmd_sweep, cmd_train, EvaluateSummary, GenerateSummary, TrainSummary};
pub use config::{load, Overrides, Resolved, RunConfig};
pub use error::CliError;
