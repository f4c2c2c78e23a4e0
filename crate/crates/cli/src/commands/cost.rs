use rayon::prelude::*;
use stn_core::{evaluate_costs, CostResult};

use super::{join_reasons, Report};
use crate::config::RunConfig;
use crate::error::Result;
use crate::table::{int, opt_real, real, Table};

/// `crossover` is `true` on the first row of each series (rows that differ
/// only in the swept value) at which the STN chain is no longer cheaper.
pub const HEADER: &[&str] = &[
    "N",
    "p",
    "Q",
    "p_X",
    "J",
    "cN",
    "cost_stn",
    "cost_tn",
    "crossover",
    "reason",
];

/// Same rule as [`stn_core::cost_crossover`].
fn crossed(r: &CostResult) -> bool {
    match (r.cost_stn, r.cost_tn) {
        (None, _) => true,
        (Some(_), None) => false,
        (Some(stn), Some(tn)) => stn >= tn,
    }
}

pub fn run(cfg: &RunConfig) -> Result<Report> {
    let points = cfg.param_points();
    let results: Vec<CostResult> = points
        .par_iter()
        .map(|p| evaluate_costs(p, &cfg.cost_model).map_err(Into::into))
        .collect::<Result<_>>()?;

    let series = cfg.series_len();
    let mut marker = vec![false; results.len()];
    for (chunk, rs) in results.chunks(series).enumerate() {
        if let Some(i) = rs.iter().position(crossed) {
            marker[chunk * series + i] = true;
        }
    }

    let mut table = Table::new(HEADER);
    for ((p, r), mark) in points.iter().zip(&results).zip(marker) {
        table.push(vec![
            int(p.signals),
            int(p.stns),
            real(p.link_noise),
            real(p.px),
            opt_real(r.refresh_interval),
            real(r.auth_bits),
            opt_real(r.cost_stn),
            opt_real(r.cost_tn),
            mark.to_string(),
            join_reasons(&[("stn", r.stn_reason.clone()), ("tn", r.tn_reason.clone())]),
        ]);
    }
    Ok(Report {
        name: "cost",
        table,
        extra: Vec::new(),
        any_feasible: results.iter().any(|r| r.stn_feasible || r.tn_feasible),
    })
}
