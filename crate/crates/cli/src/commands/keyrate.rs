use rayon::prelude::*;
use stn_core::arch::{architecture_registry, ChainArchitecture};
use stn_core::params::hoeffding_deviation;
use stn_core::{derive_sizes, stn_total_noise, Error, ProtocolParams};

use super::{join_reasons, Report};
use crate::config::RunConfig;
use crate::error::Result;
use crate::table::{int, real, Table};

pub const HEADER: &[&str] = &[
    "N",
    "p",
    "Q",
    "p_X",
    "eps",
    "eps_abort",
    "eps_prime",
    "beta",
    "beta_prime",
    "n0",
    "m0",
    "delta",
    "mu",
    "w_total",
    "l_stn",
    "l_tn",
    "rate_stn",
    "rate_tn",
    "reason",
];

fn key(
    arch: &dyn ChainArchitecture,
    params: &ProtocolParams,
    ec: f64,
) -> Result<(u64, f64, Option<String>)> {
    match arch.key_length(params, ec) {
        Ok(r) if r.is_feasible() => Ok((r.key_length_clamped, r.per_signal_rate, None)),
        Ok(r) => Ok((0, 0.0, Some(format!("key length {:.6} <= 0", r.key_length)))),
        Err(Error::Infeasible(msg)) => Ok((0, 0.0, Some(msg))),
        Err(e) => Err(e.into()),
    }
}

fn row(
    params: &ProtocolParams,
    stn: &dyn ChainArchitecture,
    tn: &dyn ChainArchitecture,
    ec: f64,
) -> Result<(Vec<String>, bool)> {
    params.validate()?;
    let sizes = match derive_sizes(params) {
        Ok(s) => Some(s),
        Err(Error::Infeasible(_)) => None,
        Err(e) => return Err(e.into()),
    };
    let w = stn_total_noise(params.link_noise, params.stns)?;
    let (l_stn, rate_stn, why_stn) = key(stn, params, ec)?;
    let (l_tn, rate_tn, why_tn) = key(tn, params, ec)?;
    let feasible = l_stn > 0 || l_tn > 0;

    let size_cells = match &sizes {
        Some(s) => vec![
            real(s.beta_prime),
            int(s.n0),
            int(s.m0),
            real(s.delta),
            real(s.mu),
        ],
        None => vec![String::new(); 5],
    };
    let mut cells = vec![
        int(params.signals),
        int(params.stns),
        real(params.link_noise),
        real(params.px),
        real(params.eps),
        real(params.eps_abort),
        real(params.eps_prime),
        real(hoeffding_deviation(params.signals as f64, params.eps_abort)),
    ];
    cells.extend(size_cells);
    cells.extend([
        real(w),
        int(l_stn),
        int(l_tn),
        real(rate_stn),
        real(rate_tn),
        join_reasons(&[("stn", why_stn), ("tn", why_tn)]),
    ]);
    Ok((cells, feasible))
}

pub fn run(cfg: &RunConfig) -> Result<Report> {
    let archs = architecture_registry();
    let (stn, tn) = (archs.get("stn")?, archs.get("tn")?);
    let ec = cfg.cost_model.ec_efficiency;
    let rows: Vec<(Vec<String>, bool)> = cfg
        .param_points()
        .par_iter()
        .map(|p| row(p, stn.as_ref(), tn.as_ref(), ec))
        .collect::<Result<_>>()?;

    let mut table = Table::new(HEADER);
    let any_feasible = rows.iter().any(|(_, f)| *f);
    for (cells, _) in rows {
        table.push(cells);
    }
    Ok(Report {
        name: "keyrate",
        table,
        extra: Vec::new(),
        any_feasible,
    })
}
