//! Experiment harness around `kex-core`: configuration files, weight and
//! instance formats, replicated runs, sweeps and table-shaped reports.

pub mod config;
pub mod deadline;
pub mod error;
pub mod experiment;
pub mod formats;
pub mod report;

pub use config::{ExperimentConfig, Overrides};
pub use error::KexError;
pub use experiment::{run_experiment, run_sweep, Experiment, RunReport, SweepReport};

use kex_core::learn::LearningConfig;

/// Learning settings taken from an experiment config. `W` defaults to 0.
pub fn learning_config(cfg: &ExperimentConfig) -> LearningConfig {
    let mut lc = LearningConfig::new(cfg.pool(), cfg.limits(), cfg.altruist_penalty.unwrap_or(0.0), cfg.seed);
    lc.outer_iterations = cfg.learning.outer_iterations;
    lc.queue_measure = cfg.learning.queue_measure();
    lc
}
