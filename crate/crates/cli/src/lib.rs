//! Config-driven experiment runner.
//!
//! Each run writes its series as CSV or JSON plus a `manifest.json`
//! describing the resolved configuration, output files and derived fits.

pub mod config;
pub mod error;
pub mod run;
pub mod sweep;
pub mod table;

pub use config::{ExperimentConfig, Format, Kind};
pub use error::{CliError, Result};
pub use ptkr_core::fit::{fit_line, LineFit};
pub use run::{run_experiment, RunManifest};
pub use sweep::run_sweep;
