//! Command-line front end for the STN/TN chain analysis: parameter sweeps of
//! key lengths and costs, chain simulations and sampling audits, written as
//! CSV with optional SVG plots.

use std::path::{Path, PathBuf};

pub mod args;
pub mod commands;
pub mod config;
pub mod error;
pub mod plot;
pub mod table;

pub use args::{Cli, Command};
pub use commands::{execute, Report};
pub use config::RunConfig;
pub use error::{CliError, Result};

/// Runs `f` on a dedicated pool when a thread count is requested.
pub fn with_threads<T: Send>(threads: Option<usize>, f: impl FnOnce() -> T + Send) -> Result<T> {
    match threads {
        None => Ok(f()),
        Some(n) => {
            let pool = rayon::ThreadPoolBuilder::new()
                .num_threads(n)
                .build()
                .map_err(|e| CliError::usage(format!("thread pool: {e}")))?;
            Ok(pool.install(f))
        }
    }
}

fn write_file(path: &Path, contents: &str) -> Result<()> {
    if let Some(dir) = path.parent() {
        std::fs::create_dir_all(dir)
            .map_err(|e| CliError::io(format!("creating {}", dir.display()), e))?;
    }
    std::fs::write(path, contents)
        .map_err(|e| CliError::io(format!("writing {}", path.display()), e))
}

/// Writes the report under `out`, or prints its CSV when `out` is `None`.
/// Returns the files written.
pub fn emit(report: &Report, out: Option<&Path>, plot: bool) -> Result<Vec<PathBuf>> {
    let csv = report.table.to_csv()?;
    let Some(dir) = out else {
        print!("{csv}");
        return Ok(Vec::new());
    };
    let mut written = Vec::new();
    let main = dir.join(format!("{}.csv", report.name));
    write_file(&main, &csv)?;
    written.push(main);
    for (rel, contents) in &report.extra {
        let path = dir.join(rel);
        write_file(&path, contents)?;
        written.push(path);
    }
    if plot {
        if let Some(svg) = plot::render(&csv)? {
            let path = dir.join(format!("{}.svg", report.name));
            write_file(&path, &svg)?;
            written.push(path);
        }
    }
    Ok(written)
}

fn replot(csv: &Path, out: Option<&Path>) -> Result<()> {
    let text = std::fs::read_to_string(csv)
        .map_err(|e| CliError::io(format!("reading {}", csv.display()), e))?;
    let svg = plot::render(&text)?.ok_or_else(|| {
        CliError::usage(format!("{} is not a keyrate or cost table", csv.display()))
    })?;
    let name = csv.with_extension("svg");
    let target = match out {
        Some(dir) => dir.join(name.file_name().expect("CSV path has a file name")),
        None => name,
    };
    write_file(&target, &svg)
}

/// Settings behind a run plus the failure budgets they imply, written as
/// `<name>.meta.json` next to the CSV.
pub fn metadata(cfg: &RunConfig, command: &str) -> Result<serde_json::Value> {
    let budgets = cfg
        .stns
        .iter()
        .map(|&p| {
            let params = stn_core::ProtocolParams {
                stns: p,
                eps: cfg.eps,
                eps_abort: cfg.eps_abort,
                ..Default::default()
            };
            Ok(serde_json::json!({
                "p": p,
                "eps_fail": stn_core::failure_probability(cfg.eps, p)?,
                "abort_budget": params.abort_budget(),
            }))
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(serde_json::json!({
        "tool": concat!("stnchain ", env!("CARGO_PKG_VERSION")),
        "command": command,
        "seed": cfg.seed,
        "trials": cfg.trials,
        "sweep": cfg.sweep.to_string(),
        "eps": cfg.eps,
        "eps_abort": cfg.eps_abort,
        "eps_prime": cfg.eps_prime,
        "ec_model": cfg.cost_model.ec.name(),
        "auth_model": cfg.cost_model.auth.name(),
        "ec_efficiency": cfg.cost_model.ec_efficiency,
        "initial_pool": cfg.cost_model.initial_pool,
        "abort_policy": cfg.abort_policy,
        "eps_pa": stn_core::pa_epsilon(cfg.eps)?,
        "failure_budgets": budgets,
        "notes": [
            "eps_pa = 9 eps + 4 sqrt(eps) as stated; the smoothing step it rests on uses eps^(1/3), so the square root may be optimistic",
            "eps_fail = 2 eps^(1/3) + 2 (p+1) eps; the reduction itself charges 2 (p+1) eps_abort, reported separately as abort_budget",
        ],
    }))
}

/// Full invocation: resolve, compute, write. A sweep without a single
/// feasible point still writes its CSV before reporting the failure.
pub fn run(cli: &Cli) -> Result<()> {
    if let Command::Replot { csv } = &cli.command {
        return replot(csv, cli.opts.out.as_deref());
    }
    let cfg = RunConfig::resolve(cli)?;
    let mut report = with_threads(cfg.threads, || execute(&cfg))??;
    if cfg.out.is_some() {
        let meta = serde_json::to_string_pretty(&metadata(&cfg, report.name)?)?;
        report.extra.push((
            PathBuf::from(format!("{}.meta.json", report.name)),
            meta + "\n",
        ));
    }
    emit(&report, cfg.out.as_deref(), cfg.plot)?;
    if !report.any_feasible {
        return Err(CliError::InfeasibleEverywhere(format!(
            "{} rows, none with a positive key",
            report.table.rows().len()
        )));
    }
    Ok(())
}
