//! Experiment driver for RIS-assisted secure sensing: scenario
//! configuration, seeded Monte-Carlo trials and reproducible result files.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod config;
pub mod error;
pub mod experiments;
pub mod output;
pub mod scene;

pub use config::{parse_config, Overrides, Preset, ScenarioConfig};
pub use error::{ConfigError, HarnessError, Result};
pub use output::{ExperimentResult, RunDir};
