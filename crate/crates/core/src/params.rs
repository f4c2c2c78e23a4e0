//! Protocol parameters and the block sizes derived from them.

use serde::{Deserialize, Serialize};

use crate::error::{check_unit, Error, Result};

/// User-chosen protocol inputs.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ProtocolParams {
    /// Signals sent over every link per key establishment.
    #[serde(rename = "N")]
    pub signals: u64,
    /// Number of intermediate nodes; the chain has `stns + 1` links.
    #[serde(rename = "p")]
    pub stns: u32,
    /// Link-level bit-flip probability, identical in both bases.
    #[serde(rename = "Q")]
    pub link_noise: f64,
    /// Probability of choosing the X basis.
    pub px: f64,
    /// Sampling / security parameter.
    pub eps: f64,
    /// Per-link abort budget for the sifting-size check.
    pub eps_abort: f64,
    /// Failure budget of the regular trusted-node baseline.
    pub eps_prime: f64,
}

impl Default for ProtocolParams {
    fn default() -> Self {
        Self {
            signals: 1_000_000,
            stns: 2,
            link_noise: 0.02,
            px: 0.2,
            eps: 1e-30,
            eps_abort: 1e-10,
            eps_prime: 1e-10,
        }
    }
}

fn open_unit(name: &'static str, value: f64) -> Result<()> {
    if value > 0.0 && value < 1.0 {
        Ok(())
    } else {
        Err(Error::Domain {
            name,
            value,
            domain: "(0, 1)",
        })
    }
}

impl ProtocolParams {
    pub fn validate(&self) -> Result<()> {
        if self.signals == 0 {
            return Err(Error::Domain {
                name: "N",
                value: 0.0,
                domain: "N >= 1",
            });
        }
        if !(0.0..0.5).contains(&self.link_noise) {
            return Err(Error::Domain {
                name: "Q",
                value: self.link_noise,
                domain: "[0, 0.5)",
            });
        }
        if !(self.px > 0.0 && self.px <= 0.5) {
            return Err(Error::Domain {
                name: "px",
                value: self.px,
                domain: "(0, 0.5]",
            });
        }
        open_unit("eps", self.eps)?;
        open_unit("eps_abort", self.eps_abort)?;
        open_unit("eps_prime", self.eps_prime)?;
        Ok(())
    }

    /// Expected surviving fraction after basis sifting, `1 - 2 px (1 - px)`.
    pub fn sift_fraction(&self) -> f64 {
        1.0 - 2.0 * self.px * (1.0 - self.px)
    }

    pub fn failure_probability(&self) -> Result<f64> {
        self.validate()?;
        failure_probability(self.eps, self.stns)
    }

    /// Total probability budget spent on the sifting abort checks, `2 (p+1) eps_abort`.
    pub fn abort_budget(&self) -> f64 {
        (2.0 * (f64::from(self.stns) + 1.0) * self.eps_abort).min(1.0)
    }
}

/// `2 eps^(1/3) + 2 (p+1) eps`, clamped to 1.
pub fn failure_probability(eps: f64, stns: u32) -> Result<f64> {
    check_unit("eps", eps)?;
    let raw = 2.0 * eps.cbrt() + 2.0 * (f64::from(stns) + 1.0) * eps;
    Ok(raw.min(1.0))
}

/// Privacy-amplification error `9 eps + 4 sqrt(eps)`.
pub fn pa_epsilon(eps: f64) -> Result<f64> {
    check_unit("eps", eps)?;
    Ok(9.0 * eps + 4.0 * eps.sqrt())
}

/// `ln(2 / eps^2)` without forming `eps^2`, which underflows for tiny eps.
fn ln_two_over_sq(eps: f64) -> f64 {
    std::f64::consts::LN_2 - 2.0 * eps.ln()
}

/// Hoeffding deviation `sqrt(ln(2/eps) / (2 n))`.
pub fn hoeffding_deviation(n: f64, eps: f64) -> f64 {
    ((2.0 / eps).ln() / (2.0 * n)).sqrt()
}

/// Sampling tolerance for `m0` test and `n0` key positions at security `eps`.
pub fn sampling_delta(m0: f64, n0: f64, eps: f64) -> f64 {
    let total = m0 + n0;
    ((total + 2.0) / (m0 * total) * ln_two_over_sq(eps)).sqrt()
}

/// Statistical deviation of the regular BB84 finite-key bound.
pub fn bb84_mu(m0: f64, n0: f64, eps_prime: f64) -> f64 {
    ((n0 + m0) / (n0 * m0) * (m0 + 1.0) / m0 * (2.0 / eps_prime).ln()).sqrt()
}

/// Every quantity produced by the protocol reduction.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DerivedSizes {
    pub signals: u64,
    pub beta: f64,
    pub n_tilde: f64,
    pub beta_prime: f64,
    /// Test (X) block size before flooring.
    pub m0_real: f64,
    /// Key (Z) block size before flooring.
    pub n0_real: f64,
    pub m0: u64,
    pub n0: u64,
    /// `m0 + n0` of the floored counts.
    pub total0: u64,
    pub delta: f64,
    pub mu: f64,
}

impl DerivedSizes {
    /// Sizes for a run whose observed test/key block sizes are `m0`, `n0`,
    /// with `delta` and `mu` recomputed from them.
    pub fn observed(params: &ProtocolParams, m0: u64, n0: u64) -> Result<Self> {
        params.validate()?;
        if m0 == 0 || n0 == 0 {
            return Err(Error::Infeasible(format!(
                "observed block sizes m0 = {m0}, n0 = {n0} must be positive"
            )));
        }
        let n = params.signals as f64;
        let beta = hoeffding_deviation(n, params.eps_abort);
        let n_tilde = n * (params.sift_fraction() - beta);
        let (m0f, n0f) = (m0 as f64, n0 as f64);
        Ok(Self {
            signals: params.signals,
            beta,
            n_tilde,
            beta_prime: hoeffding_deviation(n_tilde.max(1.0), params.eps_abort),
            m0_real: m0f,
            n0_real: n0f,
            m0,
            n0,
            total0: m0 + n0,
            delta: sampling_delta(m0f, n0f, params.eps),
            mu: bb84_mu(m0f, n0f, params.eps_prime),
        })
    }
}

/// Derives `beta`, `N~`, `beta'`, `m0`, `n0`, `N0`, `delta` and `mu`, in that order.
pub fn derive_sizes(params: &ProtocolParams) -> Result<DerivedSizes> {
    params.validate()?;
    let n = params.signals as f64;
    let sift = params.sift_fraction();

    let beta = hoeffding_deviation(n, params.eps_abort);
    let n_tilde = n * (sift - beta);
    if n_tilde <= 0.0 {
        return Err(Error::Infeasible(format!(
            "N~ = {n_tilde:.6} <= 0: N = {} too small for eps_abort = {}",
            params.signals, params.eps_abort
        )));
    }
    let beta_prime = hoeffding_deviation(n_tilde, params.eps_abort);
    let x_share = params.px * params.px / (sift - beta);
    let m0_real = n_tilde * (x_share - beta_prime);
    let n0_real = n_tilde * (1.0 - x_share - beta_prime);
    if m0_real <= 0.0 || n0_real <= 0.0 {
        return Err(Error::Infeasible(format!(
            "m0 = {m0_real:.6}, n0 = {n0_real:.6}: N = {} too small for the chosen budgets",
            params.signals
        )));
    }

    let m0 = m0_real.floor() as u64;
    let n0 = n0_real.floor() as u64;
    if m0 == 0 || n0 == 0 {
        return Err(Error::Infeasible(format!(
            "floored block sizes m0 = {m0}, n0 = {n0} must be positive"
        )));
    }

    Ok(DerivedSizes {
        signals: params.signals,
        beta,
        n_tilde,
        beta_prime,
        m0_real,
        n0_real,
        m0,
        n0,
        total0: m0 + n0,
        delta: sampling_delta(m0_real, n0_real, params.eps),
        mu: bb84_mu(m0_real, n0_real, params.eps_prime),
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn at(n: u64) -> ProtocolParams {
        ProtocolParams {
            signals: n,
            ..ProtocolParams::default()
        }
    }

    #[test]
    fn beta_and_n_tilde_at_one_million() {
        let s = derive_sizes(&at(1_000_000)).unwrap();
        // mpmath reference values
        assert!((s.beta - 3.443_762_340_123_11e-3).abs() < 1e-15);
        assert!((s.n_tilde - 676_556.237_659_876_9).abs() < 1e-6);
        assert!((s.beta_prime - 4.186_790_414_362_973e-3).abs() < 1e-15);
        assert!((s.m0_real - 37_167.400_829_388_15).abs() < 1e-6);
        assert!((s.n0_real - 633_723.638_489_265).abs() < 1e-6);
        assert!((s.delta - 0.061_120_902_904_949_66).abs() < 1e-12);
        assert!((s.mu - 0.025_992_554_249_636_552).abs() < 1e-12);
        assert_eq!((s.m0, s.n0, s.total0), (37_167, 633_723, 670_890));
    }

    #[test]
    fn weak_abort_budget_limit() {
        let p = ProtocolParams {
            eps_abort: 1.0 - 1e-12,
            ..at(1_000_000)
        };
        let s = derive_sizes(&p).unwrap();
        let limit = (std::f64::consts::LN_2 / 2e6).sqrt();
        assert!((s.beta - limit).abs() < 1e-9);
        assert!((s.n_tilde / 1e6 - (0.68 - s.beta)).abs() < 1e-12);
    }

    #[test]
    fn tiny_n_is_infeasible() {
        assert!(matches!(derive_sizes(&at(100)), Err(Error::Infeasible(_))));
    }

    #[test]
    fn invalid_params_rejected() {
        let bad = [
            ProtocolParams {
                signals: 0,
                ..at(10)
            },
            ProtocolParams {
                link_noise: 0.5,
                ..at(10)
            },
            ProtocolParams { px: 0.0, ..at(10) },
            ProtocolParams { px: 0.6, ..at(10) },
            ProtocolParams { eps: 1.0, ..at(10) },
            ProtocolParams {
                eps_abort: 0.0,
                ..at(10)
            },
        ];
        for p in bad {
            assert!(matches!(p.validate(), Err(Error::Domain { .. })), "{p:?}");
        }
    }

    #[test]
    fn failure_probability_examples() {
        assert_eq!(failure_probability(0.0, 7).unwrap(), 0.0);
        let f = failure_probability(1e-30, 2).unwrap();
        assert!((f - 2e-10).abs() < 1e-22);
        assert_eq!(failure_probability(1.0, 0).unwrap(), 1.0);
        assert!(failure_probability(-1.0, 0).is_err());
    }

    #[test]
    fn pa_epsilon_examples() {
        assert_eq!(pa_epsilon(0.0).unwrap(), 0.0);
        assert!((pa_epsilon(1e-30).unwrap() - 4e-15).abs() < 1e-27);
        assert!((pa_epsilon(0.01).unwrap() - 0.49).abs() < 1e-15);
        assert!(pa_epsilon(2.0).is_err());
    }

    #[test]
    fn delta_inverts_the_sampling_bound() {
        for n in [10_000_000u64, 1_000_000, 1 << 40] {
            let s = derive_sizes(&at(n)).unwrap();
            let total = s.m0_real + s.n0_real;
            let eps = at(n).eps;
            // work in logs; eps^2 = 1e-60 is fine but keep it symmetric
            let log_bound =
                std::f64::consts::LN_2 - s.delta * s.delta * s.m0_real * total / (total + 2.0);
            let log_target = 2.0 * eps.ln();
            assert!(((log_bound - log_target) / log_target).abs() < 1e-9);
        }
    }

    #[test]
    fn block_sizes_are_consistent() {
        for n in [1_000_000u64, 12_345_678, 10_000_000_000] {
            let s = derive_sizes(&at(n)).unwrap();
            let n0_closed = n as f64 * (1.0 - 0.32 - s.beta) * (1.0 - 2.0 * s.beta_prime);
            assert!((s.m0_real + s.n0_real - n0_closed).abs() < 1e-12 * n as f64 + 1e-6);
            assert!((s.total0 as f64 - n0_closed).abs() <= 2.0);
            assert_eq!(s.total0, s.m0 + s.n0);
        }
    }

    #[test]
    fn monotone_in_n() {
        let grid: Vec<u64> = (0..30).map(|k| (1e5 * 1.6f64.powi(k)) as u64).collect();
        let sizes: Vec<_> = grid
            .iter()
            .map(|&n| derive_sizes(&at(n)).unwrap())
            .collect();
        for w in sizes.windows(2) {
            assert!(w[1].beta < w[0].beta);
            assert!(w[1].delta < w[0].delta);
            assert!(w[1].mu < w[0].mu);
        }
    }

    #[test]
    fn delta_and_mu_monotone_in_block_sizes() {
        let eps = 1e-30;
        let mut prev = f64::INFINITY;
        for m0 in (1..200).map(|k| k as f64 * 137.0) {
            let d = sampling_delta(m0, 500_000.0, eps);
            assert!(d < prev);
            prev = d;
        }
        for base in [1_000.0, 50_000.0] {
            let mut prev_m = f64::INFINITY;
            let mut prev_n = f64::INFINITY;
            for k in 1..100 {
                let x = base + 10.0 * k as f64;
                let by_m = bb84_mu(x, base * 10.0, 1e-10);
                let by_n = bb84_mu(base, x, 1e-10);
                assert!(by_m < prev_m && by_n < prev_n);
                prev_m = by_m;
                prev_n = by_n;
            }
        }
    }

    #[test]
    fn observed_sizes_recompute_delta() {
        let p = at(1_000_000);
        let s = DerivedSizes::observed(&p, 40_000, 640_000).unwrap();
        assert_eq!(s.delta, sampling_delta(40_000.0, 640_000.0, p.eps));
        assert!(DerivedSizes::observed(&p, 0, 10).is_err());
    }
}
