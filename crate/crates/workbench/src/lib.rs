//! Experiment driver: builds the raw, semi-noisy and machine-translated
//! training sets, runs the model × language × variant matrix and renders
//! the results.
//!
//! The library is the main interface; see the `examples/` directory. The
//! `aggrobench` binary is a thin wrapper around [`cli::run`].

pub mod cli;
pub mod config;
mod error;
pub mod pipeline;
pub mod reference;

pub use config::{ExperimentConfig, Overrides, TRANSLATE_KEY_ENV};
pub use error::{WorkbenchError, EXIT_EXPERIMENT, EXIT_INPUT, EXIT_OK};
pub use pipeline::{Cell, Pipeline, StageReport};

pub use aggrobench_core as core;
pub use aggrobench_models as models;
