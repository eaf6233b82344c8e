//! Command-line front end for weak-measurement sweeps: config resolution,
//! grid evaluation, figure data and CSV/JSON output.

pub mod config;
pub mod emit;
pub mod error;
pub mod figures;
pub mod params;
pub mod run;

pub use config::{ExperimentConfig, Format, Mode, Scale, Sweep};
pub use emit::{emit, format_number, parse_csv, render, Table};
pub use error::CliError;
pub use run::{resolve, run, run_to_string, Output};

use std::ffi::OsString;

/// Parse arguments, run, and write the result.
pub fn main_with_args<I, T>(args: I, env_seed: Option<String>) -> Result<(), CliError>
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cfg = ExperimentConfig::from_args(args, env_seed)?;
    let text = run_to_string(&cfg)?;
    emit::write_text(&text, cfg.out.as_deref())
}
