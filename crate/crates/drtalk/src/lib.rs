//! Scenario files, the reproducible experiments and the `drtalk` command
//! line built on `drtalk-core`.

pub mod config;
pub mod error;
pub mod experiments;
pub mod scenario_file;

pub use config::{Experiment, ExperimentConfig, Grid};
pub use error::{DrtalkError, Result};
pub use experiments::{replay, run_experiment, run_with_scenario, Manifest, RunOutput};
pub use scenario_file::ScenarioFile;
