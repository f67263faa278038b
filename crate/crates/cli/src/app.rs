//! Argument parsing, output routing and exit codes.

use std::fs::File;
use std::io::{self, BufWriter, Write};
use std::path::{Path, PathBuf};

use clap::{Parser, Subcommand};
use serde::Serialize;

use crate::commands::{self, DEFAULT_TABLE_GRID};
use crate::config::{OutputFormat, RunConfig};
use crate::error::{CliError, CliResult, EXIT_OK, EXIT_VALIDATION};

#[derive(Debug, Parser)]
#[command(
    name = "fcqkd",
    version,
    about = "Tandem-modulator frequency-coded QKD link simulator"
)]
pub struct Cli {
    /// TOML run configuration.
    #[arg(long, global = true, value_name = "PATH")]
    pub config: Option<PathBuf>,
    /// Output file; overrides `output.path`. Standard output when unset.
    #[arg(long, global = true, value_name = "PATH")]
    pub out: Option<PathBuf>,
    /// csv or json; overrides `output.format`.
    #[arg(long, global = true, value_name = "FORMAT")]
    pub format: Option<OutputFormat>,
    /// Overrides `montecarlo.seed`.
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    /// Effective phase ΔΦ for `spectrum`, radians.
    #[arg(
        long,
        global = true,
        allow_negative_numbers = true,
        default_value_t = 0.0
    )]
    pub delta_phi: f64,
    /// Harmonic order for `spectrum`; defaults to ceil(3m) + 8.
    #[arg(long, global = true)]
    pub order: Option<usize>,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Sideband powers versus ΔΦ (or Φ_B).
    Sweep,
    /// Exact output spectrum at one ΔΦ.
    Spectrum,
    /// Regenerate the nine-configuration table and check it.
    Table2 {
        /// Bias grid points per axis.
        #[arg(long, default_value_t = DEFAULT_TABLE_GRID)]
        grid: usize,
    },
    /// Compare the small-signal model against the exact harmonic expansion.
    Verify {
        #[arg(long, default_value_t = 0.1)]
        max_m: f64,
    },
    /// Run a Monte Carlo key-exchange session.
    Qkd,
}

struct Output {
    path: Option<PathBuf>,
    format: OutputFormat,
}

impl Output {
    fn writer(&self) -> CliResult<Box<dyn Write>> {
        Ok(match &self.path {
            Some(p) => Box::new(BufWriter::new(create(p)?)),
            None => Box::new(BufWriter::new(io::stdout().lock())),
        })
    }

    fn json<T: Serialize>(&self, value: &T) -> CliResult<()> {
        if self.format != OutputFormat::Json {
            return Err(CliError::config("this command only writes json"));
        }
        let mut w = self.writer()?;
        serde_json::to_writer_pretty(&mut w, value)?;
        writeln!(w)?;
        w.flush()?;
        Ok(())
    }

    fn table<T: Serialize, const N: usize>(
        &self,
        header: [&str; N],
        rows: &[T],
        values: impl Fn(&T) -> [f64; N],
    ) -> CliResult<()> {
        match self.format {
            OutputFormat::Json => self.json(&rows),
            OutputFormat::Csv => {
                let mut w = csv::Writer::from_writer(self.writer()?);
                w.write_record(header)?;
                for r in rows {
                    w.write_record(values(r).iter().map(|v| format_float(*v)))?;
                }
                w.flush()?;
                Ok(())
            }
        }
    }
}

fn create(path: &Path) -> CliResult<File> {
    File::create(path)
        .map_err(|e| CliError::Output(format!("cannot write {}: {e}", path.display())))
}

/// Seventeen significant digits: enough to round-trip any f64.
pub fn format_float(v: f64) -> String {
    format!("{v:.16e}")
}

fn load(cli: &Cli) -> CliResult<RunConfig> {
    match &cli.config {
        Some(p) => RunConfig::load(p),
        None => Err(CliError::config("this command needs --config PATH")),
    }
}

/// Tabular commands take their format from the flag, then the config, then
/// csv. Report commands only write json; `output.format` does not apply to
/// them, but an explicit `--format csv` is rejected.
fn output(cli: &Cli, cfg: Option<&RunConfig>, tabular: bool) -> Output {
    let section = cfg.map(|c| &c.output);
    let format = if tabular {
        cli.format
            .or_else(|| section.and_then(|s| s.format))
            .unwrap_or(OutputFormat::Csv)
    } else {
        cli.format.unwrap_or(OutputFormat::Json)
    };
    Output {
        path: cli
            .out
            .clone()
            .or_else(|| section.and_then(|s| s.path.clone())),
        format,
    }
}

/// Runs one invocation and returns the process exit code.
pub fn run(cli: &Cli) -> i32 {
    match execute(cli) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            e.exit_code()
        }
    }
}

fn execute(cli: &Cli) -> CliResult<i32> {
    match &cli.command {
        Command::Sweep => {
            let cfg = load(cli)?;
            let rows = commands::sweep(&cfg)?;
            output(cli, Some(&cfg), true)
                .table(commands::SweepRow::HEADER, &rows, |r| r.values())?;
            Ok(EXIT_OK)
        }
        Command::Spectrum => {
            let cfg = load(cli)?;
            let rows = commands::spectrum(&cfg, cli.delta_phi, cli.order)?;
            output(cli, Some(&cfg), true)
                .table(commands::SpectrumRow::HEADER, &rows, |r| r.values())?;
            Ok(EXIT_OK)
        }
        Command::Table2 { grid } => {
            let report = commands::table2(*grid)?;
            output(cli, None, false).json(&report)?;
            for m in &report.mismatches {
                eprintln!("mismatch: {} {}: {}", m.row, m.cell, m.detail);
            }
            Ok(if report.pass {
                EXIT_OK
            } else {
                EXIT_VALIDATION
            })
        }
        Command::Verify { max_m } => {
            let report = commands::verify(*max_m)?;
            output(cli, None, false).json(&report)?;
            for p in report.pairs.iter().filter(|p| !p.pass) {
                eprintln!(
                    "bound exceeded: {}-{} worst {:e} > {:e}",
                    p.alice_kind, p.bob_kind, p.worst_relative, p.regression_bound
                );
            }
            Ok(if report.pass {
                EXIT_OK
            } else {
                EXIT_VALIDATION
            })
        }
        Command::Qkd => {
            let cfg = load(cli)?;
            let report = commands::qkd(&cfg, cli.seed)?;
            output(cli, Some(&cfg), false).json(&report)?;
            Ok(EXIT_OK)
        }
    }
}
