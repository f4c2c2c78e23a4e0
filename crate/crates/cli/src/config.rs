//! Resolution of flags, JSON config and defaults into one [`RunConfig`].

use std::fmt;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use serde::Deserialize;
use stn_core::chainsim::AbortPolicy;
use stn_core::cost::{auth_cost_registry, ec_cost_registry, CostModel};
use stn_core::ProtocolParams;

use crate::args::{Cli, Command};
use crate::error::{CliError, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Spacing {
    Lin,
    Log,
}

/// `points` values from `start` to `stop` inclusive.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Grid {
    pub start: f64,
    pub stop: f64,
    pub points: usize,
    pub spacing: Spacing,
}

impl FromStr for Grid {
    type Err = CliError;

    fn from_str(s: &str) -> Result<Self> {
        let parts: Vec<&str> = s.split(':').collect();
        if !(3..=4).contains(&parts.len()) {
            return Err(CliError::usage(format!(
                "grid `{s}` is not start:stop:points[:lin|log]"
            )));
        }
        let num = |t: &str| -> Result<f64> {
            t.trim()
                .parse::<f64>()
                .ok()
                .filter(|v| v.is_finite())
                .ok_or_else(|| CliError::usage(format!("grid bound `{t}` is not a finite number")))
        };
        let start = num(parts[0])?;
        let stop = num(parts[1])?;
        let points: usize = parts[2].trim().parse().map_err(|_| {
            CliError::usage(format!("grid point count `{}` is not an integer", parts[2]))
        })?;
        if points == 0 {
            return Err(CliError::usage("empty grid: points must be at least 1"));
        }
        let spacing = match parts.get(3).map(|t| t.trim()) {
            None | Some("lin") => Spacing::Lin,
            Some("log") => Spacing::Log,
            Some(other) => {
                return Err(CliError::usage(format!(
                    "grid spacing `{other}` is not lin or log"
                )))
            }
        };
        if spacing == Spacing::Log && !(start > 0.0 && stop > 0.0) {
            return Err(CliError::usage("log grid bounds must be positive"));
        }
        Ok(Self {
            start,
            stop,
            points,
            spacing,
        })
    }
}

impl Grid {
    pub fn values(&self) -> Vec<f64> {
        if self.points == 1 {
            return vec![self.start];
        }
        let last = (self.points - 1) as f64;
        (0..self.points)
            .map(|i| {
                if i == 0 {
                    return self.start;
                }
                if i + 1 == self.points {
                    return self.stop;
                }
                let t = i as f64 / last;
                match self.spacing {
                    Spacing::Lin => self.start + (self.stop - self.start) * t,
                    Spacing::Log => {
                        let (a, b) = (self.start.log10(), self.stop.log10());
                        10f64.powf(a + (b - a) * t)
                    }
                }
            })
            .collect()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SweepVar {
    Signals,
    Stns,
    LinkNoise,
    Px,
    Delta,
}

impl FromStr for SweepVar {
    type Err = CliError;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "N" | "n" => Ok(Self::Signals),
            "p" => Ok(Self::Stns),
            "Q" | "q" => Ok(Self::LinkNoise),
            "px" | "p_X" => Ok(Self::Px),
            "delta" => Ok(Self::Delta),
            other => Err(CliError::usage(format!(
                "unknown sweep variable `{other}` (N, p, Q, px, delta)"
            ))),
        }
    }
}

impl fmt::Display for SweepVar {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Self::Signals => "N",
            Self::Stns => "p",
            Self::LinkNoise => "Q",
            Self::Px => "px",
            Self::Delta => "delta",
        })
    }
}

#[derive(Debug, Clone, Deserialize)]
#[serde(untagged)]
enum OneOrMany<T> {
    One(T),
    Many(Vec<T>),
}

impl<T> OneOrMany<T> {
    fn into_vec(self) -> Vec<T> {
        match self {
            Self::One(v) => vec![v],
            Self::Many(v) => v,
        }
    }
}

/// Contents of a `--config` JSON file. Every field is optional.
#[derive(Debug, Clone, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FileConfig {
    #[serde(rename = "N")]
    signals: Option<OneOrMany<f64>>,
    #[serde(rename = "p")]
    stns: Option<OneOrMany<u32>>,
    #[serde(rename = "Q")]
    link_noise: Option<OneOrMany<f64>>,
    px: Option<OneOrMany<f64>>,
    eps: Option<f64>,
    eps_abort: Option<f64>,
    eps_prime: Option<f64>,
    seed: Option<u64>,
    trials: Option<u64>,
    grid: Option<String>,
    sweep: Option<String>,
    out: Option<PathBuf>,
    plot: Option<bool>,
    threads: Option<usize>,
    ec_model: Option<String>,
    auth_model: Option<String>,
    pool: Option<f64>,
    ec_efficiency: Option<f64>,
    abort_policy: Option<String>,
    transcripts: Option<bool>,
    m: Option<OneOrMany<u64>>,
    delta: Option<OneOrMany<f64>>,
    weight: Option<OneOrMany<f64>>,
}

impl FileConfig {
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| CliError::io(format!("reading config {}", path.display()), e))?;
        serde_json::from_str(&text)
            .map_err(|e| CliError::usage(format!("config {}: {e}", path.display())))
    }
}

/// Fully resolved settings for one invocation.
#[derive(Debug, Clone)]
pub struct RunConfig {
    pub command: Command,
    pub signals: Vec<u64>,
    pub stns: Vec<u32>,
    pub link_noise: Vec<f64>,
    pub px: Vec<f64>,
    pub eps: f64,
    pub eps_abort: f64,
    pub eps_prime: f64,
    pub seed: u64,
    pub trials: Option<u64>,
    pub sweep: SweepVar,
    pub out: Option<PathBuf>,
    pub plot: bool,
    pub threads: Option<usize>,
    pub cost_model: CostModel,
    pub abort_policy: AbortPolicy,
    pub transcripts: bool,
    pub sample_sizes: Option<Vec<u64>>,
    pub deltas: Vec<f64>,
    pub weights: Option<Vec<f64>>,
}

pub const DEFAULT_SEED: u64 = 20_240_601;

fn parse_count(raw: &str) -> Result<u64> {
    let v: f64 = raw
        .trim()
        .parse()
        .map_err(|_| CliError::usage(format!("N = `{raw}` is not a number")))?;
    count_from_f64(v)
}

fn count_from_f64(v: f64) -> Result<u64> {
    if !(v.is_finite() && v >= 1.0 && v.fract() == 0.0 && v < 9.2e18) {
        return Err(CliError::usage(format!(
            "N = {v} is not a positive integer"
        )));
    }
    Ok(v as u64)
}

fn non_empty<T>(name: &str, v: Vec<T>) -> Result<Vec<T>> {
    if v.is_empty() {
        Err(CliError::usage(format!("{name} list is empty")))
    } else {
        Ok(v)
    }
}

/// Rounds grid values to integers and drops the repeats rounding creates.
fn integer_axis(values: &[f64]) -> Vec<f64> {
    let mut out: Vec<f64> = Vec::with_capacity(values.len());
    for v in values.iter().map(|v| v.round()) {
        if out.last() != Some(&v) {
            out.push(v);
        }
    }
    out
}

impl RunConfig {
    pub fn resolve(cli: &Cli) -> Result<Self> {
        let file = match &cli.opts.config {
            Some(path) => FileConfig::load(path)?,
            None => FileConfig::default(),
        };
        Self::merge(cli, file)
    }

    fn merge(cli: &Cli, file: FileConfig) -> Result<Self> {
        let o = &cli.opts;
        let command = cli.command.clone();
        let base = ProtocolParams::default();

        let signals = match (&o.signals, file.signals) {
            (Some(v), _) => v
                .iter()
                .map(|s| parse_count(s))
                .collect::<Result<Vec<_>>>()?,
            (None, Some(v)) => v
                .into_vec()
                .into_iter()
                .map(count_from_f64)
                .collect::<Result<_>>()?,
            (None, None) if command == Command::SampleAudit => (4..=16).collect(),
            (None, None) => vec![base.signals],
        };
        let stns = match (&o.stns, file.stns) {
            (Some(v), _) => v.clone(),
            (None, Some(v)) => v.into_vec(),
            (None, None) if command == Command::Noise => vec![0, 1, 2, 3],
            (None, None) => vec![base.stns],
        };
        let link_noise = match (&o.link_noise, file.link_noise) {
            (Some(v), _) => v.clone(),
            (None, Some(v)) => v.into_vec(),
            (None, None) if command == Command::Noise => vec![0.01, 0.02, 0.05],
            (None, None) => vec![base.link_noise],
        };
        let px =
            o.px.clone()
                .or(file.px.map(OneOrMany::into_vec))
                .unwrap_or(vec![base.px]);
        let deltas = o
            .delta
            .clone()
            .or(file.delta.map(OneOrMany::into_vec))
            .unwrap_or_else(|| (1..=10).map(|k| f64::from(k) / 20.0).collect());
        let sample_sizes = o.m.clone().or(file.m.map(OneOrMany::into_vec));
        let weights = o.weight.clone().or(file.weight.map(OneOrMany::into_vec));

        let sweep = match o.sweep.clone().or(file.sweep) {
            Some(s) => s.parse()?,
            None => match command {
                Command::Noise => SweepVar::LinkNoise,
                Command::SampleAudit => SweepVar::Delta,
                _ => SweepVar::Signals,
            },
        };

        let ec_name = o
            .ec_model
            .clone()
            .or(file.ec_model)
            .unwrap_or("linear".into());
        let auth_name = o
            .auth_model
            .clone()
            .or(file.auth_model)
            .unwrap_or("log2".into());
        let cost_model = CostModel {
            ec: ec_cost_registry().get(&ec_name)?,
            auth: auth_cost_registry().get(&auth_name)?,
            initial_pool: o.pool.or(file.pool),
            ec_efficiency: o.ec_efficiency.or(file.ec_efficiency).unwrap_or(1.0),
        };
        if !(cost_model.ec_efficiency.is_finite() && cost_model.ec_efficiency >= 0.0) {
            return Err(CliError::usage(
                "ec-efficiency must be finite and non-negative",
            ));
        }
        let abort_policy = match o.abort_policy.clone().or(file.abort_policy) {
            Some(s) => s.parse()?,
            None => AbortPolicy::default(),
        };

        let out = o.out.clone().or(file.out);
        let plot = o.plot || file.plot.unwrap_or(false);
        let transcripts = o.transcripts || file.transcripts.unwrap_or(false);
        if plot && out.is_none() {
            return Err(CliError::usage("--plot needs --out"));
        }
        if transcripts && out.is_none() {
            return Err(CliError::usage("--transcripts needs --out"));
        }
        let threads = o.threads.or(file.threads);
        if threads == Some(0) {
            return Err(CliError::usage("--threads must be at least 1"));
        }

        let mut cfg = Self {
            command,
            signals: non_empty("N", signals)?,
            stns: non_empty("p", stns)?,
            link_noise: non_empty("Q", link_noise)?,
            px: non_empty("px", px)?,
            eps: o.eps.or(file.eps).unwrap_or(base.eps),
            eps_abort: o.eps_abort.or(file.eps_abort).unwrap_or(base.eps_abort),
            eps_prime: o.eps_prime.or(file.eps_prime).unwrap_or(base.eps_prime),
            seed: o.seed.or(file.seed).unwrap_or(DEFAULT_SEED),
            trials: o.trials.or(file.trials),
            sweep,
            out,
            plot,
            threads,
            cost_model,
            abort_policy,
            transcripts,
            sample_sizes,
            deltas: non_empty("delta", deltas)?,
            weights,
        };
        if let Some(raw) = o.grid.clone().or(file.grid) {
            cfg.apply_grid(&raw.parse()?)?;
        }
        Ok(cfg)
    }

    fn apply_grid(&mut self, grid: &Grid) -> Result<()> {
        let values = grid.values();
        match self.sweep {
            SweepVar::Signals => {
                self.signals = integer_axis(&values)
                    .into_iter()
                    .map(count_from_f64)
                    .collect::<Result<_>>()?;
            }
            SweepVar::Stns => {
                self.stns = integer_axis(&values)
                    .into_iter()
                    .map(|v| {
                        if (0.0..=f64::from(u32::MAX)).contains(&v) {
                            Ok(v as u32)
                        } else {
                            Err(CliError::usage(format!("p = {v} is not a node count")))
                        }
                    })
                    .collect::<Result<_>>()?;
            }
            SweepVar::LinkNoise => self.link_noise = values,
            SweepVar::Px => self.px = values,
            SweepVar::Delta => self.deltas = values,
        }
        Ok(())
    }

    /// Cartesian product of the protocol axes, the swept one varying fastest.
    pub fn param_points(&self) -> Vec<ProtocolParams> {
        let mut axes = vec![
            SweepVar::Stns,
            SweepVar::Px,
            SweepVar::LinkNoise,
            SweepVar::Signals,
        ];
        if let Some(pos) = axes.iter().position(|a| *a == self.sweep) {
            let swept = axes.remove(pos);
            axes.push(swept);
        }
        let lens: Vec<usize> = axes.iter().map(|a| self.axis_len(*a)).collect();
        let total: usize = lens.iter().product();
        let base = ProtocolParams {
            eps: self.eps,
            eps_abort: self.eps_abort,
            eps_prime: self.eps_prime,
            ..ProtocolParams::default()
        };
        let mut idx = vec![0usize; axes.len()];
        let mut points = Vec::with_capacity(total);
        for _ in 0..total {
            let mut p = base;
            for (axis, &i) in axes.iter().zip(&idx) {
                match axis {
                    SweepVar::Signals => p.signals = self.signals[i],
                    SweepVar::Stns => p.stns = self.stns[i],
                    SweepVar::LinkNoise => p.link_noise = self.link_noise[i],
                    SweepVar::Px => p.px = self.px[i],
                    SweepVar::Delta => unreachable!("delta is not a protocol axis"),
                }
            }
            points.push(p);
            for k in (0..idx.len()).rev() {
                idx[k] += 1;
                if idx[k] < lens[k] {
                    break;
                }
                idx[k] = 0;
            }
        }
        points
    }

    /// Number of consecutive points that share everything but the swept value.
    pub fn series_len(&self) -> usize {
        match self.sweep {
            SweepVar::Delta => 1,
            axis => self.axis_len(axis),
        }
    }

    fn axis_len(&self, axis: SweepVar) -> usize {
        match axis {
            SweepVar::Signals => self.signals.len(),
            SweepVar::Stns => self.stns.len(),
            SweepVar::LinkNoise => self.link_noise.len(),
            SweepVar::Px => self.px.len(),
            SweepVar::Delta => self.deltas.len(),
        }
    }
}
