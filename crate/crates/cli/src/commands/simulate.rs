use std::path::PathBuf;

use rayon::prelude::*;
use stn_core::chainsim::{AbortPolicy, DistillLedger, SimConfig};
use stn_core::rates::closed_form_stn;
use stn_core::stats::mean_std;
use stn_core::{simulate_chain, stn_total_noise, Error, ProtocolParams};

use super::Report;
use crate::config::RunConfig;
use crate::error::Result;
use crate::table::{int, real, Table};

pub const DEFAULT_TRIALS: u64 = 100;

/// One row per parameter point. `w_obs_*` average over trials with a
/// non-empty test block, `l_realized_*` over trials that did not abort.
pub const HEADER: &[&str] = &[
    "N",
    "p",
    "Q",
    "p_X",
    "eps",
    "eps_abort",
    "eps_prime",
    "seed",
    "trials",
    "abort_policy",
    "aborts",
    "abort_rate",
    "w_obs_mean",
    "w_obs_std",
    "w_total",
    "sifted_mean",
    "sifted_std",
    "sifted_expected",
    "l_realized_mean",
    "l_realized_std",
    "l_closed_form",
    "reason",
];

/// Per-trial companion table, `simulate_trials.csv`. Links are numbered from 1.
pub const TRIAL_HEADER: &[&str] = &[
    "N",
    "p",
    "Q",
    "p_X",
    "trial",
    "aborted",
    "abort_check",
    "abort_link",
    "n0_obs",
    "m0_obs",
    "w_obs",
    "l_realized",
];

struct TrialOutcome {
    abort: Option<(String, usize)>,
    n0_obs: u64,
    m0_obs: u64,
    w_obs: Option<f64>,
    sifted: Vec<f64>,
    realized: Option<u64>,
    json: Option<String>,
}

fn policy_name(p: AbortPolicy) -> &'static str {
    match p {
        AbortPolicy::PaperAbort => "paper-abort",
        AbortPolicy::ObserveOnly => "observe-only",
    }
}

fn trial(sim: &SimConfig, t: u64, ec: f64, keep_json: bool) -> Result<TrialOutcome> {
    let tr = simulate_chain(sim, t)?;
    let realized = match DistillLedger::for_transcript(&tr, &sim.params, ec) {
        Ok(ledger) => Some(ledger.key.key_length_clamped),
        Err(Error::Aborted { .. }) => None,
        Err(Error::Infeasible(_)) => Some(0),
        Err(e) => return Err(e.into()),
    };
    let json = if keep_json {
        Some(serde_json::to_string(&tr)?)
    } else {
        None
    };
    Ok(TrialOutcome {
        abort: tr.abort.map(|a| (a.check.to_string(), a.link + 1)),
        n0_obs: tr.n0_obs,
        m0_obs: tr.m0_obs,
        w_obs: tr.w_obs,
        sifted: tr.sifted_fractions(),
        realized,
        json,
    })
}

fn point_cells(p: &ProtocolParams) -> Vec<String> {
    vec![int(p.signals), int(p.stns), real(p.link_noise), real(p.px)]
}

pub fn run(cfg: &RunConfig) -> Result<Report> {
    let trials = cfg.trials.unwrap_or(DEFAULT_TRIALS);
    let ec = cfg.cost_model.ec_efficiency;
    let mut table = Table::new(HEADER);
    let mut per_trial = Table::new(TRIAL_HEADER);
    let mut extra = Vec::new();

    for (k, params) in cfg.param_points().into_iter().enumerate() {
        let sim = SimConfig {
            params,
            seed: cfg.seed,
            trials,
            abort_policy: cfg.abort_policy,
        };
        sim.validate()?;
        let outcomes: Vec<TrialOutcome> = (0..trials)
            .into_par_iter()
            .map(|t| trial(&sim, t, ec, cfg.transcripts))
            .collect::<Result<_>>()?;

        let aborts = outcomes.iter().filter(|o| o.abort.is_some()).count() as u64;
        let w: Vec<f64> = outcomes.iter().filter_map(|o| o.w_obs).collect();
        let sifted: Vec<f64> = outcomes
            .iter()
            .flat_map(|o| o.sifted.iter().copied())
            .collect();
        let realized: Vec<f64> = outcomes
            .iter()
            .filter_map(|o| o.realized)
            .map(|l| l as f64)
            .collect();
        let (w_mean, w_std) = mean_std(&w);
        let (s_mean, s_std) = mean_std(&sifted);
        let (l_mean, l_std) = mean_std(&realized);
        let (closed, reason) = match closed_form_stn(&params, ec) {
            Ok(r) => (r.key_length_clamped, String::new()),
            Err(Error::Infeasible(msg)) => (0, msg),
            Err(e) => return Err(e.into()),
        };
        let maybe = |present: bool, x: f64| if present { real(x) } else { String::new() };

        let mut row = point_cells(&params);
        row.extend([
            real(params.eps),
            real(params.eps_abort),
            real(params.eps_prime),
            int(cfg.seed),
            int(trials),
            policy_name(cfg.abort_policy).to_owned(),
            int(aborts),
            real(aborts as f64 / trials as f64),
            maybe(!w.is_empty(), w_mean),
            maybe(!w.is_empty(), w_std),
            real(stn_total_noise(params.link_noise, params.stns)?),
            real(s_mean),
            real(s_std),
            real(params.sift_fraction()),
            maybe(!realized.is_empty(), l_mean),
            maybe(!realized.is_empty(), l_std),
            int(closed),
            reason,
        ]);
        table.push(row);

        for (t, o) in outcomes.into_iter().enumerate() {
            let mut cells = point_cells(&params);
            let (check, link) = match &o.abort {
                Some((c, l)) => (c.clone(), int(*l as u64)),
                None => (String::new(), String::new()),
            };
            cells.extend([
                int(t as u64),
                o.abort.is_some().to_string(),
                check,
                link,
                int(o.n0_obs),
                int(o.m0_obs),
                o.w_obs.map(real).unwrap_or_default(),
                o.realized.map(int).unwrap_or_default(),
            ]);
            per_trial.push(cells);
            if let Some(json) = o.json {
                extra.push((
                    PathBuf::from(format!("transcripts/point{k:03}_trial{t:05}.json")),
                    json,
                ));
            }
        }
    }
    extra.insert(
        0,
        (PathBuf::from("simulate_trials.csv"), per_trial.to_csv()?),
    );
    Ok(Report {
        name: "simulate",
        table,
        extra,
        any_feasible: true,
    })
}
