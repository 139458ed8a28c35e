//! Batch pipeline: configuration, the stage runners and figure output.

pub mod config;
pub mod error;
mod figures;
pub mod pipeline;

pub use config::{Overrides, PipelineConfig};
pub use error::{CliError, CliResult};
pub use pipeline::{run, Stage};
