//! Experiment configuration, synthetic data, metrics and drivers.

pub mod config;
pub mod data;
pub mod experiments;
pub mod metrics;

pub use config::{CirculantName, ExperimentConfig, ExperimentKind, OutputFormat, Overrides};
pub use experiments::{combo_seed, run, run_experiment, Report};
pub use metrics::{MetricsRow, Param};
