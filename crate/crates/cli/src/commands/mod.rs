//! One module per subcommand. Each turns a [`RunConfig`] into a [`Report`]
//! without touching the filesystem.

use std::path::PathBuf;

use crate::args::Command;
use crate::config::RunConfig;
use crate::error::{CliError, Result};
use crate::table::Table;

pub mod audit;
pub mod cost;
pub mod keyrate;
pub mod noise;
pub mod simulate;

#[derive(Debug, Clone)]
pub struct Report {
    /// File stem of the main CSV.
    pub name: &'static str,
    pub table: Table,
    /// Additional files, relative to the output directory.
    pub extra: Vec<(PathBuf, String)>,
    /// False when no point of the sweep produced a key (or a cost).
    pub any_feasible: bool,
}

pub fn execute(cfg: &RunConfig) -> Result<Report> {
    match cfg.command {
        Command::Keyrate => keyrate::run(cfg),
        Command::Cost => cost::run(cfg),
        Command::Simulate => simulate::run(cfg),
        Command::SampleAudit => audit::run(cfg),
        Command::Noise => noise::run(cfg),
        Command::Replot { .. } => Err(CliError::usage(
            "replot works on a CSV file, not a configuration",
        )),
    }
}

/// `"stn: ...; tn: ..."` from the parts that are present.
pub(crate) fn join_reasons(parts: &[(&str, Option<String>)]) -> String {
    parts
        .iter()
        .filter_map(|(tag, r)| r.as_ref().map(|r| format!("{tag}: {r}")))
        .collect::<Vec<_>>()
        .join("; ")
}
