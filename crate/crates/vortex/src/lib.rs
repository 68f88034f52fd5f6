//! Batch driver for exterior-domain vorticity simulations: JSON run
//! configurations, VXT1 field snapshots and CSV diagnostics.

pub mod commands;
pub mod config;
pub mod error;
pub mod runner;
pub mod snapshot;

pub use config::{parse_config, RunConfig};
pub use error::CliError;
pub use runner::{run, RunReport};

/// Environment variable naming the default output directory.
pub const OUTPUT_DIR_ENV: &str = "VORTEX_OUTPUT_DIR";

/// `$VORTEX_OUTPUT_DIR`, or the working directory when unset.
pub fn default_output_dir() -> std::path::PathBuf {
    std::env::var_os(OUTPUT_DIR_ENV).map_or_else(|| ".".into(), Into::into)
}
