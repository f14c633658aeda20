//! Experiment driver: configs, metrics, trial execution and artifacts.
//!
//! A run writes, per trial, `measurements.json` (the raw, possibly corrupted
//! set), `truth.json` and one `<solver>.csv` trace, plus a top-level
//! `summary.json` with mean and standard deviation over trials.

pub mod config;
pub mod run;

pub use crate::metrics::{lav_objective, random_truth, rmse, Truth};
pub use config::{ExperimentConfig, InitSpec, PlanSpec, SolverSpec, TruthSpec};
pub use run::{run, run_config, RunError, RunOptions, Summary};
