//! Configuration, file formats, report bundles and the pipeline driver for
//! `hnse-core`.

pub mod config;
pub mod formats;
pub mod pipeline;
pub mod run_dir;

pub use config::{resolve_config, ConfigError, RunConfig, Stage};
pub use pipeline::{run_pipeline, run_pipeline_in, PipelineError, PipelineOutcome, StageOutcome, StageStatus};
