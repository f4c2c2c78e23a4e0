//! Cost per secret key bit for TN and STN chains.
//!
//! A TN chain runs error correction and privacy amplification on every link
//! for every establishment. An STN chain only runs them at the end points,
//! but each node spends `c(N)` bits of its authentication pool per use and
//! has to refill the pool with a full pairwise QKD run every `J` uses.

use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::bitmath::entropy_unchecked;
use crate::error::{Error, Result};
use crate::params::ProtocolParams;
use crate::rates::{closed_form_stn, closed_form_tn, stn_total_noise};
use crate::registry::{Named, Registry};

/// Cost of one round of error correction plus privacy amplification over
/// `signals` rounds with raw-key noise `noise`.
pub trait EcCost: Named + Send + Sync {
    fn cost(&self, signals: f64, noise: f64) -> f64;
}

/// Authentication key bits consumed per key establishment of `signals` rounds.
pub trait AuthCost: Named + Send + Sync {
    fn cost(&self, signals: f64) -> f64;
}

/// `EC(N, Q) = N`.
#[derive(Debug, Clone, Copy, Default)]
pub struct LinearEc;

impl Named for LinearEc {
    fn name(&self) -> &str {
        "linear"
    }
}

impl EcCost for LinearEc {
    fn cost(&self, signals: f64, _noise: f64) -> f64 {
        signals
    }
}

/// `EC(N, Q) = N (1 + h(Q))`: decoding work grows with the syndrome length.
#[derive(Debug, Clone, Copy, Default)]
pub struct EntropyScaledEc;

impl Named for EntropyScaledEc {
    fn name(&self) -> &str {
        "entropy-scaled"
    }
}

impl EcCost for EntropyScaledEc {
    fn cost(&self, signals: f64, noise: f64) -> f64 {
        signals * (1.0 + entropy_unchecked(noise.clamp(0.0, 0.5)))
    }
}

/// `c(N) = log2 N`.
#[derive(Debug, Clone, Copy, Default)]
pub struct Log2Auth;

impl Named for Log2Auth {
    fn name(&self) -> &str {
        "log2"
    }
}

impl AuthCost for Log2Auth {
    fn cost(&self, signals: f64) -> f64 {
        signals.log2()
    }
}

pub fn ec_cost_registry() -> Registry<dyn EcCost> {
    let mut reg: Registry<dyn EcCost> = Registry::new("ec-cost");
    reg.register(Arc::new(LinearEc))
        .register(Arc::new(EntropyScaledEc));
    reg
}

pub fn auth_cost_registry() -> Registry<dyn AuthCost> {
    let mut reg: Registry<dyn AuthCost> = Registry::new("auth-cost");
    reg.register(Arc::new(Log2Auth));
    reg
}

#[derive(Clone)]
pub struct CostModel {
    pub ec: Arc<dyn EcCost>,
    pub auth: Arc<dyn AuthCost>,
    /// Initial authentication pool `k`; `None` means `l_BB84(N, Q)`.
    pub initial_pool: Option<f64>,
    /// Multiplier on the error-correction leakage in both key lengths.
    pub ec_efficiency: f64,
}

impl Default for CostModel {
    fn default() -> Self {
        Self {
            ec: Arc::new(LinearEc),
            auth: Arc::new(Log2Auth),
            initial_pool: None,
            ec_efficiency: 1.0,
        }
    }
}

impl std::fmt::Debug for CostModel {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("CostModel")
            .field("ec", &self.ec.name())
            .field("auth", &self.auth.name())
            .field("initial_pool", &self.initial_pool)
            .field("ec_efficiency", &self.ec_efficiency)
            .finish()
    }
}

/// End-link multiplier `2p + 2`: every link has two ends running EC and PA.
fn link_ends(params: &ProtocolParams) -> f64 {
    2.0 * f64::from(params.stns) + 2.0
}

fn tn_key_bits(params: &ProtocolParams, model: &CostModel) -> Result<f64> {
    let tn = closed_form_tn(params, model.ec_efficiency)?;
    if !tn.is_feasible() {
        return Err(Error::Infeasible(format!(
            "no TN key at N = {}, Q = {}",
            params.signals, params.link_noise
        )));
    }
    Ok(tn.key_length_clamped as f64)
}

/// `(2p+2) EC(N, Q) / l_TN(N, Q)`.
pub fn cost_tn(params: &ProtocolParams, model: &CostModel) -> Result<f64> {
    let l_tn = tn_key_bits(params, model)?;
    let n = params.signals as f64;
    Ok(link_ends(params) * model.ec.cost(n, params.link_noise) / l_tn)
}

/// Number of establishments `J = (k - c(N)) / c(N)` an STN can serve before
/// its authentication pool has to be refilled.
pub fn refresh_interval(params: &ProtocolParams, model: &CostModel) -> Result<f64> {
    let pool = match model.initial_pool {
        Some(k) => k,
        None => closed_form_tn(params, model.ec_efficiency)?.key_length_clamped as f64,
    };
    let per_use = model.auth.cost(params.signals as f64);
    if per_use.is_nan() || per_use <= 0.0 {
        return Err(Error::Domain {
            name: "c(N)",
            value: per_use,
            domain: "(0, inf)",
        });
    }
    if pool <= per_use {
        return Err(Error::PoolExhausted { pool, per_use });
    }
    Ok((pool - per_use) / per_use)
}

/// `(2 J EC(N, w) + (2p+2) EC(N, Q)) / (J l_STN)` with `w` the total chain noise.
pub fn cost_stn(params: &ProtocolParams, model: &CostModel) -> Result<f64> {
    let j = refresh_interval(params, model)?;
    if j < 1.0 {
        return Err(Error::Infeasible(format!("refresh interval J = {j} < 1")));
    }
    let stn = closed_form_stn(params, model.ec_efficiency)?;
    if !stn.is_feasible() {
        return Err(Error::Infeasible(format!(
            "no STN key at N = {}, Q = {}, p = {}",
            params.signals, params.link_noise, params.stns
        )));
    }
    let n = params.signals as f64;
    let w = stn_total_noise(params.link_noise, params.stns)?;
    let numerator =
        2.0 * j * model.ec.cost(n, w) + link_ends(params) * model.ec.cost(n, params.link_noise);
    Ok(numerator / (j * stn.key_length_clamped as f64))
}

/// Both costs at one parameter point, with the reason whenever one is missing.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CostResult {
    pub cost_tn: Option<f64>,
    pub cost_stn: Option<f64>,
    /// Refresh interval `J`, when the pool supports at least one use.
    pub refresh_interval: Option<f64>,
    /// Authentication bits per establishment, `c(N)`.
    pub auth_bits: f64,
    pub stn_feasible: bool,
    pub tn_feasible: bool,
    pub stn_reason: Option<String>,
    pub tn_reason: Option<String>,
}

pub fn evaluate_costs(params: &ProtocolParams, model: &CostModel) -> Result<CostResult> {
    params.validate()?;
    let soft = |r: Result<f64>| -> Result<std::result::Result<f64, String>> {
        match r {
            Ok(v) => Ok(Ok(v)),
            Err(e @ (Error::Infeasible(_) | Error::PoolExhausted { .. })) => Ok(Err(e.to_string())),
            Err(e) => Err(e),
        }
    };
    let tn = soft(cost_tn(params, model))?;
    let j = soft(refresh_interval(params, model))?;
    let stn = soft(cost_stn(params, model))?;
    Ok(CostResult {
        tn_feasible: tn.is_ok(),
        stn_feasible: stn.is_ok(),
        cost_tn: tn.as_ref().ok().copied(),
        cost_stn: stn.as_ref().ok().copied(),
        refresh_interval: j.ok(),
        auth_bits: model.auth.cost(params.signals as f64),
        tn_reason: tn.err(),
        stn_reason: stn.err(),
    })
}

/// Smallest grid noise at which the STN chain stops being cheaper than the
/// TN chain (including points where the STN chain yields no key at all).
pub fn cost_crossover(
    base: &ProtocolParams,
    noise_grid: &[f64],
    model: &CostModel,
) -> Result<Option<f64>> {
    for &q in noise_grid {
        let params = ProtocolParams {
            link_noise: q,
            ..*base
        };
        let r = evaluate_costs(&params, model)?;
        let crossed = match (r.cost_stn, r.cost_tn) {
            (None, _) => true,
            (Some(_), None) => false,
            (Some(stn), Some(tn)) => stn >= tn,
        };
        if crossed {
            return Ok(Some(q));
        }
    }
    Ok(None)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn big(q: f64, p: u32) -> ProtocolParams {
        ProtocolParams {
            signals: 10_000_000_000,
            stns: p,
            link_noise: q,
            ..ProtocolParams::default()
        }
    }

    #[test]
    fn tn_cost_single_link() {
        let params = ProtocolParams {
            stns: 0,
            ..ProtocolParams::default()
        };
        let l = closed_form_tn(&params, 1.0).unwrap().key_length_clamped as f64;
        let c = cost_tn(&params, &CostModel::default()).unwrap();
        assert!((c - 2.0 * 1e6 / l).abs() < 1e-12);
    }

    #[test]
    fn tn_cost_scales_with_link_ends() {
        let model = CostModel::default();
        let c0 = cost_tn(&big(0.02, 0), &model).unwrap();
        for p in 1..6 {
            let c = cost_tn(&big(0.02, p), &model).unwrap();
            assert!((c / c0 - (p as f64 + 1.0)).abs() < 1e-12);
        }
    }

    #[test]
    fn refresh_interval_examples() {
        let model = CostModel {
            initial_pool: Some(2.0 * 1e6f64.log2()),
            ..CostModel::default()
        };
        let params = ProtocolParams::default();
        assert!((refresh_interval(&params, &model).unwrap() - 1.0).abs() < 1e-12);
        assert!((Log2Auth.cost(1e6) - 19.931_568_569_324_174).abs() < 1e-12);

        let j = refresh_interval(&big(0.01, 2), &CostModel::default()).unwrap();
        assert!(j > 1e6, "J = {j}");

        let starved = CostModel {
            initial_pool: Some(10.0),
            ..CostModel::default()
        };
        assert!(matches!(
            refresh_interval(&params, &starved),
            Err(Error::PoolExhausted { .. })
        ));
    }

    #[test]
    fn stn_cost_large_refresh_limit() {
        let params = big(0.02, 2);
        let model = CostModel {
            initial_pool: Some(1e200),
            ..CostModel::default()
        };
        let l = closed_form_stn(&params, 1.0).unwrap().key_length_clamped as f64;
        let c = cost_stn(&params, &model).unwrap();
        assert!((c - 2.0 * 1e10 / l).abs() / c < 1e-12);
    }

    #[test]
    fn stn_cost_non_increasing_in_refresh_interval() {
        let params = big(0.02, 3);
        let mut prev = f64::INFINITY;
        for k in 1..40 {
            let model = CostModel {
                initial_pool: Some(34.0 * 1.7f64.powi(k)),
                ..CostModel::default()
            };
            if let Ok(c) = cost_stn(&params, &model) {
                assert!(c <= prev);
                prev = c;
            }
        }
        assert!(prev.is_finite());
    }

    #[test]
    fn stn_cheaper_at_low_noise() {
        let model = CostModel::default();
        let p = big(0.02, 2);
        assert!(cost_stn(&p, &model).unwrap() < cost_tn(&p, &model).unwrap());
    }

    #[test]
    fn stn_cost_blows_up_near_tolerance() {
        let model = CostModel::default();
        let mut prev = 0.0;
        let mut saw_infeasible = false;
        for k in 0..80 {
            let q = 0.030 + k as f64 * 0.0002;
            let p = big(q, 2);
            assert!(cost_tn(&p, &model).unwrap() < 40.0);
            match cost_stn(&p, &model) {
                Ok(c) => {
                    assert!(!saw_infeasible);
                    assert!(c > prev);
                    prev = c;
                }
                Err(Error::Infeasible(_)) => saw_infeasible = true,
                Err(e) => panic!("{e}"),
            }
        }
        assert!(saw_infeasible);
        assert!(prev > 100.0, "last finite STN cost {prev}");
    }

    #[test]
    fn crossover_examples() {
        let model = CostModel::default();
        let grid = [0.2, 0.3, 0.4];
        assert_eq!(
            cost_crossover(&big(0.0, 2), &grid, &model).unwrap(),
            Some(0.2)
        );

        let grid: Vec<f64> = (1..50).map(|k| k as f64 * 0.001).collect();
        let q = cost_crossover(&big(0.0, 2), &grid, &model)
            .unwrap()
            .unwrap();
        assert!(q > 0.0 && q < 0.05);

        // p = 1 with a huge pool: crossover exactly where 2 EC / l_STN = 4 EC / l_TN
        let pool = CostModel {
            initial_pool: Some(1e200),
            ..CostModel::default()
        };
        let q = cost_crossover(&big(0.0, 1), &grid, &pool).unwrap().unwrap();
        let ratio = |q: f64| {
            let p = big(q, 1);
            let stn = closed_form_stn(&p, 1.0).unwrap().key_length_clamped as f64;
            let tn = closed_form_tn(&p, 1.0).unwrap().key_length_clamped as f64;
            (2.0 / stn) / (4.0 / tn)
        };
        assert!(ratio(q) >= 1.0);
        assert!(ratio(q - 0.001) < 1.0);
    }

    #[test]
    fn evaluate_reports_reasons() {
        let r = evaluate_costs(&big(0.08, 2), &CostModel::default()).unwrap();
        assert!(r.tn_feasible && !r.stn_feasible);
        assert!(r.cost_stn.is_none() && r.stn_reason.is_some());
        assert!(r.cost_tn.unwrap() > 0.0);
        assert!((r.auth_bits - 1e10f64.log2()).abs() < 1e-12);
    }

    #[test]
    fn costs_converge_in_n() {
        let model = CostModel::default();
        let grid: Vec<u64> = (8..=12).map(|e| 10u64.pow(e)).collect();
        let stn: Vec<f64> = grid
            .iter()
            .map(|&n| {
                cost_stn(
                    &ProtocolParams {
                        signals: n,
                        ..big(0.02, 2)
                    },
                    &model,
                )
                .unwrap()
            })
            .collect();
        let tn: Vec<f64> = grid
            .iter()
            .map(|&n| {
                cost_tn(
                    &ProtocolParams {
                        signals: n,
                        ..big(0.02, 2)
                    },
                    &model,
                )
                .unwrap()
            })
            .collect();
        for series in [&stn, &tn] {
            for w in series.windows(2) {
                assert!(w[1] < w[0]);
            }
            let last = series[series.len() - 1];
            let prev = series[series.len() - 2];
            assert!((prev - last) / last < 0.01);
        }
    }

    #[test]
    fn registries_resolve_defaults() {
        let ec = ec_cost_registry();
        assert_eq!(ec.get("linear").unwrap().cost(100.0, 0.3), 100.0);
        assert!(ec.get("entropy-scaled").unwrap().cost(100.0, 0.5) == 200.0);
        assert!(ec.get("quadratic").is_err());
        assert_eq!(auth_cost_registry().get("log2").unwrap().cost(1024.0), 10.0);
    }
}
