use stn_core::{estimate_total_noise_mc, stn_total_noise};

use super::Report;
use crate::config::RunConfig;
use crate::error::Result;
use crate::table::{int, real, Table};

/// Monte Carlo columns are empty unless `--trials` is given.
pub const HEADER: &[&str] = &[
    "Q",
    "p",
    "w_total",
    "mc_trials",
    "mc_mean",
    "mc_lower",
    "mc_upper",
    "mc_within",
];

pub fn run(cfg: &RunConfig) -> Result<Report> {
    let mut table = Table::new(HEADER);
    for &q in &cfg.link_noise {
        for &p in &cfg.stns {
            let w = stn_total_noise(q, p)?;
            let mc = match cfg.trials {
                Some(t) => {
                    let e = estimate_total_noise_mc(q, p, t, cfg.seed)?;
                    vec![
                        int(t),
                        real(e.mean),
                        real(e.lower),
                        real(e.upper),
                        e.contains(w).to_string(),
                    ]
                }
                None => vec![String::new(); 5],
            };
            let mut row = vec![real(q), int(p), real(w)];
            row.extend(mc);
            table.push(row);
        }
    }
    Ok(Report {
        name: "noise",
        table,
        extra: Vec::new(),
        any_feasible: true,
    })
}
