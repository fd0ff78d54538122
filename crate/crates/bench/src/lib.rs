//! Benchmark experiments for multilayer ReSuMe networks: configuration,
//! pattern generation, multi-trial runs and CSV reporting.

pub mod config;
pub mod error;
pub mod experiments;
pub mod patterns;
pub mod runner;

pub use config::{ExperimentKind, ExperimentSpec};
pub use error::BenchError;
pub use runner::{
    run_experiment, run_experiment_with, run_sweep, run_trial, write_reports, ExperimentReport, RunOptions, Summary,
    TrialResult,
};
