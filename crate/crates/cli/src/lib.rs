//! Command-line front end for the tandem-modulator link model: sweeps,
//! spectra, the nine-configuration table, oracle verification and Monte
//! Carlo sessions, written as CSV or JSON.

// `!(x >= 0.0)` style checks are deliberate: they also reject NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod app;
pub mod commands;
pub mod config;
pub mod error;
pub mod fixture;

pub use app::{run, Cli};
pub use config::RunConfig;
pub use error::{CliError, CliResult};
