use std::path::PathBuf;

use clap::{Args, Parser, Subcommand};

#[derive(Debug, Clone, Parser)]
#[command(
    name = "stnchain",
    version,
    about = "Finite-key rates, costs and simulations for chains of simplified trusted nodes"
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,

    #[command(flatten)]
    pub opts: Options,
}

#[derive(Debug, Clone, PartialEq, Eq, Subcommand)]
pub enum Command {
    /// Closed-form STN and TN key lengths over a parameter grid.
    Keyrate,
    /// Cost per secret key bit for both architectures.
    Cost,
    /// Monte Carlo runs of the full chain protocol.
    Simulate,
    /// Exact or sampled failure probability of the STN sampling strategy next to its bound.
    SampleAudit,
    /// Total chain noise for each (Q, p).
    Noise,
    /// Re-render the SVG of a saved keyrate or cost CSV.
    Replot { csv: PathBuf },
}

/// Every option may also come from `--config`; flags win over the file,
/// the file wins over built-in defaults.
#[derive(Debug, Clone, Default, Args)]
pub struct Options {
    /// Signals per link, comma separated (`1e6` notation accepted).
    #[arg(long = "N", global = true, value_delimiter = ',', value_name = "N")]
    pub signals: Option<Vec<String>>,

    /// Number of intermediate nodes, comma separated.
    #[arg(long = "p", global = true, value_delimiter = ',')]
    pub stns: Option<Vec<u32>>,

    /// Link-level noise, comma separated.
    #[arg(long = "Q", global = true, value_delimiter = ',')]
    pub link_noise: Option<Vec<f64>>,

    /// X-basis probability, comma separated.
    #[arg(long, global = true, value_delimiter = ',')]
    pub px: Option<Vec<f64>>,

    #[arg(long, global = true)]
    pub eps: Option<f64>,

    #[arg(long, global = true)]
    pub eps_abort: Option<f64>,

    #[arg(long, global = true)]
    pub eps_prime: Option<f64>,

    #[arg(long, global = true)]
    pub seed: Option<u64>,

    #[arg(long, global = true)]
    pub trials: Option<u64>,

    /// `start:stop:points:lin|log`, applied to the `--sweep` variable.
    #[arg(long, global = true)]
    pub grid: Option<String>,

    /// Variable the grid runs over: N, p, Q, px or delta.
    #[arg(long, global = true)]
    pub sweep: Option<String>,

    /// Output directory; CSV goes to stdout when absent.
    #[arg(long, global = true)]
    pub out: Option<PathBuf>,

    /// Also write an SVG plot next to the CSV (needs `--out`).
    #[arg(long, global = true)]
    pub plot: bool,

    /// JSON file with any of the options above (snake_case keys, `N`/`p`/`Q` as is).
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,

    /// Worker threads; results do not depend on it.
    #[arg(long, global = true)]
    pub threads: Option<usize>,

    /// Error-correction cost model.
    #[arg(long, global = true)]
    pub ec_model: Option<String>,

    /// Authentication cost model.
    #[arg(long, global = true)]
    pub auth_model: Option<String>,

    /// Initial authentication pool `k`; defaults to the BB84 key length.
    #[arg(long, global = true)]
    pub pool: Option<f64>,

    /// Error-correction efficiency factor `f`.
    #[arg(long, global = true)]
    pub ec_efficiency: Option<f64>,

    /// `paper-abort` or `observe-only`.
    #[arg(long, global = true)]
    pub abort_policy: Option<String>,

    /// Write one JSON transcript per simulated trial under `<out>/transcripts`.
    #[arg(long, global = true)]
    pub transcripts: bool,

    /// Sample sizes for `sample-audit`, comma separated.
    #[arg(long, global = true, value_delimiter = ',')]
    pub m: Option<Vec<u64>>,

    /// Sampling tolerances for `sample-audit`, comma separated.
    #[arg(long, global = true, value_delimiter = ',')]
    pub delta: Option<Vec<f64>>,

    /// Relative weights of the folded word for sampled audits, comma separated.
    #[arg(long, global = true, value_delimiter = ',')]
    pub weight: Option<Vec<f64>>,
}
