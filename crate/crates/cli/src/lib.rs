//! Command-line front end for the `raman-battery` simulator: JSON run
//! configurations, one-parameter sweeps and the gain/efficiency tables,
//! all written as CSV.

pub mod config;
pub mod error;
pub mod figures;
pub mod sweep;
pub mod table;

pub use config::RunConfig;
pub use error::{CliError, CliResult};
