//! Reproducible experiment runner for the budgeted-memory library.
//!
//! Experiments are declared in a JSON config, expanded into independent
//! cells (method x grid point x seed), executed in parallel, and written
//! out deterministically: results are keyed and sorted before any file is
//! emitted, every output carries the config digest, and the same config
//! always produces byte-identical summaries.

pub mod config;
pub mod experiments;
pub mod manifest;
pub mod methods;

pub use config::{BaselineParams, ExperimentConfig, ExperimentKind, LearnerParams};
pub use manifest::{config_digest, RunManifest};
