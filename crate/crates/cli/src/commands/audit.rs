use rayon::prelude::*;
use stn_core::sampling::{
    analytic_failure_bound, binomial, exact_failure_probability, failure_by_weight,
    mc_failure_estimate, SamplingInstance, ENUMERATION_LIMIT,
};
use stn_core::BitString;

use super::Report;
use crate::config::RunConfig;
use crate::error::{CliError, Result};
use crate::table::{int, real, Table};

pub const DEFAULT_MC_TRIALS: u64 = 100_000;

/// `method` is `exact-worst` (every weight class enumerated, worst one
/// reported), `exact` (one weight, all subsets) or `mc` (sampled subsets,
/// 99% Wilson interval). `ones` is the weight of the folded word. A row is a
/// violation when the failure probability (for `mc`: the interval's lower
/// end) exceeds the bound.
pub const HEADER: &[&str] = &[
    "N",
    "m",
    "delta",
    "p",
    "method",
    "ones",
    "failure",
    "ci_lower",
    "ci_upper",
    "bound",
    "violation",
];

#[derive(Debug, Clone, Copy)]
struct Case {
    n: u64,
    m: u64,
    delta: f64,
    stns: u32,
    ones: Option<u64>,
}

fn cases(cfg: &RunConfig) -> Result<Vec<Case>> {
    let mut out = Vec::new();
    for &n in &cfg.signals {
        let ms: Vec<u64> = match &cfg.sample_sizes {
            Some(ms) => {
                if let Some(&bad) = ms.iter().find(|&&m| m == 0 || m > n / 2) {
                    return Err(CliError::usage(format!(
                        "m = {bad} must lie in 1..=N/2 = {} for N = {n}",
                        n / 2
                    )));
                }
                ms.clone()
            }
            None => (1..=n / 2).collect(),
        };
        for m in ms {
            for &delta in &cfg.deltas {
                if !(delta > 0.0 && delta.is_finite()) {
                    return Err(CliError::usage(format!("delta = {delta} must be positive")));
                }
                for &stns in &cfg.stns {
                    match &cfg.weights {
                        None => out.push(Case {
                            n,
                            m,
                            delta,
                            stns,
                            ones: None,
                        }),
                        Some(ws) => {
                            for &w in ws {
                                if !(0.0..=1.0).contains(&w) {
                                    return Err(CliError::usage(format!(
                                        "weight {w} is outside [0, 1]"
                                    )));
                                }
                                out.push(Case {
                                    n,
                                    m,
                                    delta,
                                    stns,
                                    ones: Some((w * n as f64).round() as u64),
                                });
                            }
                        }
                    }
                }
            }
        }
    }
    Ok(out)
}

fn word(n: u64, ones: u64) -> BitString {
    BitString::from_bits((0..n).map(|i| i < ones))
}

fn evaluate(c: Case, trials: u64, seed: u64) -> Result<Vec<String>> {
    let bound = analytic_failure_bound(c.n, c.m, c.delta)?;
    let subsets = binomial(c.n, c.m);
    let (method, ones, failure, lo, hi, violation) = match c.ones {
        None if subsets.saturating_mul(c.n + 1) <= ENUMERATION_LIMIT => {
            let by_weight = failure_by_weight(c.n as usize, c.m as usize, c.delta, c.stns)?;
            let (ones, &worst) = by_weight.iter().enumerate().fold((0, &0.0), |acc, (i, f)| {
                if *f > *acc.1 {
                    (i, f)
                } else {
                    acc
                }
            });
            ("exact-worst", ones as u64, worst, None, None, worst > bound)
        }
        Some(ones) if subsets <= ENUMERATION_LIMIT => {
            let inst =
                SamplingInstance::from_folded(word(c.n, ones), c.stns, c.delta, c.m as usize)?;
            let f = exact_failure_probability(&inst)?;
            ("exact", ones, f, None, None, f > bound)
        }
        ones => {
            let ones = ones.unwrap_or(c.n / 2);
            let inst =
                SamplingInstance::from_folded(word(c.n, ones), c.stns, c.delta, c.m as usize)?;
            let e = mc_failure_estimate(&inst, trials, seed)?;
            (
                "mc",
                ones,
                e.mean,
                Some(e.lower),
                Some(e.upper),
                e.lower > bound,
            )
        }
    };
    Ok(vec![
        int(c.n),
        int(c.m),
        real(c.delta),
        int(c.stns),
        method.to_owned(),
        int(ones),
        real(failure),
        lo.map(real).unwrap_or_default(),
        hi.map(real).unwrap_or_default(),
        real(bound),
        violation.to_string(),
    ])
}

pub fn run(cfg: &RunConfig) -> Result<Report> {
    let trials = cfg.trials.unwrap_or(DEFAULT_MC_TRIALS);
    let rows: Vec<Vec<String>> = cases(cfg)?
        .into_par_iter()
        .map(|c| evaluate(c, trials, cfg.seed))
        .collect::<Result<_>>()?;
    let mut table = Table::new(HEADER);
    for r in rows {
        table.push(r);
    }
    Ok(Report {
        name: "sample_audit",
        table,
        extra: Vec::new(),
        any_feasible: true,
    })
}
