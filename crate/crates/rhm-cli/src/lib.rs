//! Experiment harness: TOML-configured, seeded, reproducible runs that
//! emit fixed-schema CSV files (optionally with self-contained SVG plots)
//! plus a manifest with content checksums.

pub mod config;
pub mod csvout;
pub mod error;
pub mod presets;
pub mod run;
pub mod svg;

pub use config::{ExperimentConfig, ExperimentKind};
pub use error::CliError;
pub use run::{run, Manifest, RunOutput};
