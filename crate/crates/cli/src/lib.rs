//! Command-line front end for polysketch: matrix ingestion, run configuration,
//! JSON reports and benchmark sweeps.

pub mod bench;
pub mod config;
pub mod error;
pub mod io;
pub mod report;
pub mod run;

pub use config::{Command, KernelKind, RunConfig};
pub use error::CliError;
pub use report::ReportRecord;
pub use run::run_command;
