//! Experiment configuration and the report pipeline behind the `hypertree`
//! binary.

pub mod config;
pub mod pipeline;

pub use config::{EpsilonPolicy, ExperimentConfig};
pub use pipeline::{run_pipeline, Bundle, StageError};
