//! Experiment runner for the `mfcg-core` solvers: TOML configuration, mode
//! dispatch, trajectory CSVs and plain-text reports.

pub mod config;
pub mod error;
pub mod report;
pub mod runner;
pub mod trajectory;

pub use config::{
    parse_config, parse_config_file, ExperimentConfig, LoadedModel, Mode, ModelConfig, Tolerances,
};
pub use error::HarnessError;
pub use report::{compare_to_exact, CheckReport, Comparison, QEntryComparison, RunReport};
pub use runner::{run_experiment, ExperimentOutcome};

/// Environment variable naming the default output directory.
pub const OUT_DIR_ENV: &str = "MFCG_OUT_DIR";
/// Output directory used when neither the CLI, the config nor the environment sets one.
pub const DEFAULT_OUT_DIR: &str = "mfcg_out";
