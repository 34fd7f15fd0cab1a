//! Experiment orchestration: configs, seeded runs over a worker pool, CSV
//! traces, JSON summaries, saved environments and slope fits.

mod config;
mod env_io;
mod io;
mod run;

pub use config::{AlgorithmSpec, ExperimentConfig, InstanceSpec};
pub use env_io::{generate_env, verify_env, EnvBody, EnvDocument, EnvKind, Environment, ENV_SCHEMA};
pub use io::{
    fit_regret_slope, load_trace_csv, read_trace_csv, save_trace_csv, validate_summary, write_trace_csv,
    ExperimentSummary, RunSummary, SlopeFit, MIN_FIT_ROUNDS, RUN_SCHEMA,
};
pub use run::{
    baseline_greedy_mle, build_environment, build_environment_at, csv_name, greedy_config, run_cell, run_config,
    run_config_at, run_experiment, run_on, ExperimentOutcome, EXIT_CONFIG, EXIT_OK, EXIT_PARTIAL,
};
