//! Configuration, orchestration and report writing for the `vshare` binary.

pub mod config;
pub mod pipeline;
pub mod synth;

pub use config::{Experiment, ExperimentConfig};
pub use pipeline::{run_pipeline, write_report, ExperimentReport};
