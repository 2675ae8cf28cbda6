//! Command-line front end: scenario parsing, parameter sweeps and CSV reports.

pub mod args;
pub mod commands;
pub mod error;
pub mod scenario;
pub mod table;

use std::env;
use std::fs::{self, File};
use std::io::{self, BufWriter, Write};
use std::path::{Path, PathBuf};

use args::{Cli, Command};
use error::CliResult;
use scenario::{Range, Scenario};
use table::Table;

/// Runs a parsed command and returns its table.
pub fn execute(cli: &Cli) -> CliResult<Table> {
    let scenario = Scenario::from_args(cli.command.common())?;
    match &cli.command {
        Command::Density { x_grid, .. } => commands::cmd_density(&scenario, &Range::parse(x_grid)?),
        Command::Errors { .. } => commands::cmd_errors(&scenario),
        Command::Contour { .. } => commands::cmd_contour(&scenario),
        Command::Montecarlo { .. } => commands::cmd_montecarlo(&scenario),
        Command::Stationary { .. } => commands::cmd_stationary(&scenario),
    }
}

/// Where output goes: `--out`, else `$WVA_OUT_DIR/<command>.csv`, else stdout (`None`).
pub fn output_path(cli: &Cli) -> Option<PathBuf> {
    match &cli.command.common().out {
        Some(p) if p == Path::new("-") => None,
        Some(p) => Some(p.clone()),
        None => env::var_os("WVA_OUT_DIR")
            .filter(|d| !d.is_empty())
            .map(|d| PathBuf::from(d).join(format!("{}.csv", cli.command.name()))),
    }
}

/// Executes the command and writes its CSV.
pub fn run(cli: &Cli) -> CliResult<()> {
    let table = execute(cli)?;
    match output_path(cli) {
        Some(path) => {
            if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
                fs::create_dir_all(dir)?;
            }
            let mut out = BufWriter::new(File::create(&path)?);
            table.write_csv(&mut out)?;
            out.flush()?;
        }
        None => table.write_csv(io::stdout().lock())?,
    }
    Ok(())
}
