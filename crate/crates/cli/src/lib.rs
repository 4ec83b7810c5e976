//! Experiment driver: config files, parameter sweeps, CSV output,
//! analytic-vs-simulation validation and figure data.

pub mod config;
pub mod diversity;
mod error;
pub mod figures;
pub mod sweep;
pub mod validate;

pub use config::{AlphaMode, ExperimentConfig, Scheme};
pub use error::{CliError, CliResult};
pub use sweep::{run_sweep, SweepRow};
