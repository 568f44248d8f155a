//! Command-line orchestration: configuration, pipelines, self checks and image export.

pub mod commands;
pub mod config;
pub mod export;
pub mod selftest;

pub use commands::{
    cmd_experiment, cmd_forward, cmd_precompute, cmd_reconstruct, run_experiment, ExperimentReport,
};
pub use config::{ExperimentConfig, GridSpec, Overrides};
pub use export::{cmd_export, export_pgm};
pub use selftest::cmd_selftest;
