//! Configuration, execution and persistence of turnpike experiments.

pub mod config;
pub mod output;
pub mod runner;

pub use config::{
    load_config, parse_config, validate_config, ConfigError, Diagnostic, ExperimentConfig,
    SCHEMA_VERSION,
};
pub use output::{fmt_float, horizon_dir, DEVIATION_HEADER, SWEEP_HEADER};
pub use runner::{run_experiment, HorizonSummary, Report, RunError, RunOptions, RunSummary};
