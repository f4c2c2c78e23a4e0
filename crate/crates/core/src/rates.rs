//! Closed-form finite-key lengths for STN and regular TN chains.

use serde::{Deserialize, Serialize};

use crate::bitmath::entropy_unchecked;
use crate::error::{check_unit, Error, Result};
use crate::params::{derive_sizes, DerivedSizes, ProtocolParams};

/// A key length together with the terms it was assembled from.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct KeyRateResult {
    /// `entropy_term - leakage - pa_penalty`; negative when no key can be distilled.
    pub key_length: f64,
    pub key_length_clamped: u64,
    pub entropy_term: f64,
    pub leakage: f64,
    pub pa_penalty: f64,
    /// Noise fed to the entropy, before clamping at 0.5.
    pub effective_noise: f64,
    /// Clamped key bits per signal sent.
    pub per_signal_rate: f64,
    /// Size of the raw key block the bound was evaluated on.
    pub key_block: u64,
}

impl KeyRateResult {
    pub fn is_feasible(&self) -> bool {
        self.key_length_clamped > 0
    }

    /// Clamped key bits per raw key bit.
    pub fn per_key_bit_rate(&self) -> f64 {
        if self.key_block == 0 {
            0.0
        } else {
            self.key_length_clamped as f64 / self.key_block as f64
        }
    }

    fn assemble(
        signals: u64,
        key_block: u64,
        effective_noise: f64,
        pa_penalty: f64,
        ec_efficiency: f64,
    ) -> Self {
        let h = entropy_unchecked(effective_noise.min(0.5));
        let n0 = key_block as f64;
        let entropy_term = n0 * (1.0 - h);
        let leakage = ec_efficiency * n0 * h;
        let key_length = entropy_term - leakage - pa_penalty;
        let key_length_clamped = if key_length > 0.0 {
            key_length.floor() as u64
        } else {
            0
        };
        Self {
            key_length,
            key_length_clamped,
            entropy_term,
            leakage,
            pa_penalty,
            effective_noise,
            per_signal_rate: key_length_clamped as f64 / signals as f64,
            key_block,
        }
    }
}

fn check_efficiency(ec_efficiency: f64) -> Result<()> {
    if ec_efficiency.is_finite() && ec_efficiency >= 0.0 {
        Ok(())
    } else {
        Err(Error::Domain {
            name: "ec_efficiency",
            value: ec_efficiency,
            domain: "[0, inf)",
        })
    }
}

fn check_eps(name: &'static str, eps: f64) -> Result<()> {
    if eps > 0.0 && eps < 1.0 {
        Ok(())
    } else {
        Err(Error::Domain {
            name,
            value: eps,
            domain: "(0, 1)",
        })
    }
}

/// Probability that an odd number of the `stns + 1` links flip a bit.
pub fn stn_total_noise(link_noise: f64, stns: u32) -> Result<f64> {
    if !(0.0..=0.5).contains(&link_noise) {
        return Err(Error::Domain {
            name: "Q",
            value: link_noise,
            domain: "[0, 0.5]",
        });
    }
    let links = stns as i32 + 1;
    let q = link_noise;
    if q == 0.0 {
        return Ok(0.0);
    }
    // sum over odd error counts k = 2i+1 of C(p+1, k) Q^k (1-Q)^(p+1-k)
    let mut total = 0.0;
    if links <= 60 {
        let mut binom = 1.0f64;
        for k in 0..=links {
            if k % 2 == 1 {
                total += binom * q.powi(k) * (1.0 - q).powi(links - k);
            }
            binom = binom * f64::from(links - k) / f64::from(k + 1);
        }
    } else {
        // long chains: binomials overflow and (1-Q)^n underflows, so sum in log space
        let (ln_q, ln_r) = (q.ln(), (1.0 - q).ln());
        let mut ln_binom = 0.0f64;
        for k in 0..=links {
            if k % 2 == 1 {
                total += (ln_binom + f64::from(k) * ln_q + f64::from(links - k) * ln_r).exp();
            }
            ln_binom += f64::from(links - k).ln() - f64::from(k + 1).ln();
        }
    }
    Ok(total)
}

/// Finite key length of an STN chain at observed test error `w_obs`.
pub fn stn_key_length(
    sizes: &DerivedSizes,
    w_obs: f64,
    eps: f64,
    ec_efficiency: f64,
) -> Result<KeyRateResult> {
    check_unit("w_obs", w_obs)?;
    check_eps("eps", eps)?;
    check_efficiency(ec_efficiency)?;
    Ok(KeyRateResult::assemble(
        sizes.signals,
        sizes.n0,
        w_obs + sizes.delta,
        2.0 * (1.0 / eps).log2(),
        ec_efficiency,
    ))
}

/// Finite key length of a single BB84 link, which is also that of a regular TN chain.
pub fn tn_key_length(
    sizes: &DerivedSizes,
    link_noise: f64,
    eps_prime: f64,
    ec_efficiency: f64,
) -> Result<KeyRateResult> {
    check_unit("Q", link_noise)?;
    check_eps("eps_prime", eps_prime)?;
    check_efficiency(ec_efficiency)?;
    Ok(KeyRateResult::assemble(
        sizes.signals,
        sizes.n0,
        link_noise + sizes.mu,
        2.0 * (2.0 / eps_prime).log2(),
        ec_efficiency,
    ))
}

/// Infinite-N key rate per raw key bit, `1 - (1 + f) h(w)`, clamped at zero.
pub fn asymptotic_stn_rate(link_noise: f64, stns: u32, ec_efficiency: f64) -> Result<f64> {
    check_efficiency(ec_efficiency)?;
    let w = stn_total_noise(link_noise, stns)?;
    Ok((1.0 - (1.0 + ec_efficiency) * entropy_unchecked(w)).max(0.0))
}

/// STN key length with `w_obs` set to the expected total noise.
pub fn closed_form_stn(params: &ProtocolParams, ec_efficiency: f64) -> Result<KeyRateResult> {
    let sizes = derive_sizes(params)?;
    let w = stn_total_noise(params.link_noise, params.stns)?;
    stn_key_length(&sizes, w, params.eps, ec_efficiency)
}

pub fn closed_form_tn(params: &ProtocolParams, ec_efficiency: f64) -> Result<KeyRateResult> {
    let sizes = derive_sizes(params)?;
    tn_key_length(&sizes, params.link_noise, params.eps_prime, ec_efficiency)
}

/// Largest observed error rate for which the STN key length stays positive,
/// located by bisection on the unclamped key length. `None` if even `w = 0`
/// yields no key.
pub fn stn_noise_tolerance(
    sizes: &DerivedSizes,
    eps: f64,
    ec_efficiency: f64,
    tol: f64,
) -> Result<Option<f64>> {
    let len = |w: f64| stn_key_length(sizes, w, eps, ec_efficiency).map(|r| r.key_length);
    if len(0.0)? <= 0.0 {
        return Ok(None);
    }
    let (mut lo, mut hi) = (0.0, 0.5);
    while hi - lo > tol {
        let mid = 0.5 * (lo + hi);
        if len(mid)? > 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Ok(Some(0.5 * (lo + hi)))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn h(x: f64) -> f64 {
        entropy_unchecked(x)
    }

    /// Every error pattern on `links` links, weighted by its probability.
    fn odd_parity_by_enumeration(q: f64, links: u32) -> f64 {
        (0u32..1 << links)
            .filter(|pat| pat.count_ones() % 2 == 1)
            .map(|pat| {
                let wt = pat.count_ones() as i32;
                q.powi(wt) * (1.0 - q).powi(links as i32 - wt)
            })
            .sum()
    }

    #[test]
    fn total_noise_examples() {
        assert!((stn_total_noise(0.02, 0).unwrap() - 0.02).abs() < 1e-15);
        for q in [0.0, 0.013, 0.25, 0.5] {
            assert!((stn_total_noise(q, 1).unwrap() - 2.0 * q * (1.0 - q)).abs() < 1e-15);
        }
        assert!((stn_total_noise(0.02, 2).unwrap() - 0.057_632).abs() < 1e-15);
        assert!(stn_total_noise(0.6, 1).is_err());
    }

    #[test]
    fn total_noise_matches_enumeration() {
        for p in 0..=4 {
            for k in 0..=50 {
                let q = k as f64 * 0.01;
                let a = stn_total_noise(q, p).unwrap();
                let b = odd_parity_by_enumeration(q, p + 1);
                assert!((a - b).abs() < 1e-12, "q={q} p={p}");
            }
        }
    }

    #[test]
    fn total_noise_monotone_and_saturates() {
        for k in 1..=40 {
            let q = k as f64 * 0.01;
            let mut prev = 0.0;
            for p in 0..12 {
                let w = stn_total_noise(q, p).unwrap();
                assert!(w > prev);
                prev = w;
            }
            assert!((stn_total_noise(q, 400).unwrap() - 0.5).abs() < 1e-3 || q < 0.01);
        }
        for p in 0..6 {
            let mut prev = -1.0;
            for k in 0..=50 {
                let w = stn_total_noise(k as f64 * 0.01, p).unwrap();
                assert!(w > prev);
                prev = w;
            }
        }
        assert!((stn_total_noise(0.01, 2000).unwrap() - 0.5).abs() < 1e-9);
    }

    fn sizes_with(n0: u64, delta: f64, mu: f64) -> DerivedSizes {
        DerivedSizes {
            signals: n0 * 2,
            beta: 0.0,
            n_tilde: n0 as f64,
            beta_prime: 0.0,
            m0_real: 0.0,
            n0_real: n0 as f64,
            m0: 0,
            n0,
            total0: n0,
            delta,
            mu,
        }
    }

    #[test]
    fn noiseless_limit() {
        let s = sizes_with(1 << 40, 0.0, 0.0);
        let r = stn_key_length(&s, 0.0, 0.5, 1.0).unwrap();
        assert!((r.key_length / s.n0 as f64 - 1.0).abs() < 1e-9);
        let r = tn_key_length(&s, 0.0, 0.999, 1.0).unwrap();
        assert!((r.key_length / s.n0 as f64 - 1.0).abs() < 1e-9);
    }

    #[test]
    fn saturated_noise_gives_no_key() {
        let s = sizes_with(1_000_000, 0.1, 0.1);
        let r = stn_key_length(&s, 0.45, 1e-30, 1.0).unwrap();
        assert_eq!(r.key_length_clamped, 0);
        assert_eq!(r.entropy_term, 0.0);
        assert_eq!(r.per_signal_rate, 0.0);
        let r = tn_key_length(&s, 0.4, 1e-10, 1.0).unwrap();
        assert_eq!(r.key_length_clamped, 0);
    }

    #[test]
    fn result_decomposition() {
        let params = ProtocolParams::default();
        let r = closed_form_stn(&params, 1.0).unwrap();
        assert_eq!(r.key_length, r.entropy_term - r.leakage - r.pa_penalty);
        assert_eq!(r.key_length_clamped, r.key_length.floor() as u64);
        assert!((r.pa_penalty - 2.0 * 1e30f64.log2()).abs() < 1e-9);
        let t = closed_form_tn(&params, 1.0).unwrap();
        assert!((t.pa_penalty - 2.0 * 2e10f64.log2()).abs() < 1e-9);
        assert!((0.0..=1.0).contains(&r.per_signal_rate));
    }

    #[test]
    fn eleven_percent_threshold() {
        let s = sizes_with(1 << 50, 0.0, 0.0);
        let w = stn_noise_tolerance(&s, 0.5, 1.0, 1e-10).unwrap().unwrap();
        // root of h(x) = 1/2, mpmath
        assert!((w - 0.110_027_864_438_359_55).abs() < 1e-8);
        let below = stn_key_length(&s, 0.1095, 0.5, 1.0).unwrap();
        let above = stn_key_length(&s, 0.1105, 0.5, 1.0).unwrap();
        assert!(below.key_length_clamped > 0 && above.key_length_clamped == 0);
    }

    #[test]
    fn asymptotic_examples() {
        for p in 0..5 {
            assert_eq!(asymptotic_stn_rate(0.0, p, 1.0).unwrap(), 1.0);
        }
        let r = asymptotic_stn_rate(0.02, 2, 1.0).unwrap();
        assert!((r - 0.364_055_550_709_070_7).abs() < 1e-12);
        assert!((r - (1.0 - 2.0 * h(0.057_632))).abs() < 1e-12);
        // Q with total noise 0.12 at p = 1: 2Q(1-Q) = 0.12
        let q = (1.0 - (1.0f64 - 0.24).sqrt()) / 2.0;
        assert!((stn_total_noise(q, 1).unwrap() - 0.12).abs() < 1e-12);
        assert_eq!(asymptotic_stn_rate(q, 1, 1.0).unwrap(), 0.0);
    }

    #[test]
    fn stn_monotone_in_noise_and_chain_length() {
        let base = ProtocolParams {
            signals: 100_000_000,
            ..ProtocolParams::default()
        };
        let sizes = derive_sizes(&base).unwrap();
        let mut prev = f64::INFINITY;
        for k in 0..=60 {
            let r = stn_key_length(&sizes, k as f64 * 0.002, base.eps, 1.0).unwrap();
            assert!(r.key_length <= prev);
            prev = r.key_length;
        }
        let mut prev = u64::MAX;
        let tn = closed_form_tn(&base, 1.0).unwrap();
        for p in 0..8 {
            let params = ProtocolParams { stns: p, ..base };
            let r = closed_form_stn(&params, 1.0).unwrap();
            assert!(r.key_length_clamped <= prev);
            prev = r.key_length_clamped;
            assert_eq!(closed_form_tn(&params, 1.0).unwrap(), tn);
        }
    }

    #[test]
    fn tn_beats_stn_for_any_intermediate_node() {
        for p in 1..6 {
            let params = ProtocolParams {
                signals: 1_000_000,
                stns: p,
                link_noise: 0.02,
                ..ProtocolParams::default()
            };
            let stn = closed_form_stn(&params, 1.0).unwrap();
            let tn = closed_form_tn(&params, 1.0).unwrap();
            assert!(tn.key_length > stn.key_length, "p={p}");
        }
    }

    #[test]
    fn converges_to_asymptotic_rate() {
        for p in 1..=3 {
            let asym = asymptotic_stn_rate(0.02, p, 1.0).unwrap();
            let mut prev_gap = f64::INFINITY;
            for n in [1_000_000u64, 100_000_000, 10_000_000_000] {
                let params = ProtocolParams {
                    signals: n,
                    stns: p,
                    ..ProtocolParams::default()
                };
                let r = closed_form_stn(&params, 1.0).unwrap();
                let gap = asym - r.per_key_bit_rate();
                assert!(gap > 0.0 && gap < prev_gap, "p={p} n={n} gap={gap}");
                assert!(r.per_signal_rate < asym);
                prev_gap = gap;
            }
            assert!(prev_gap < 1e-2);
        }
    }

    #[test]
    fn rejects_bad_inputs() {
        let s = sizes_with(1000, 0.01, 0.01);
        assert!(stn_key_length(&s, -0.1, 0.1, 1.0).is_err());
        assert!(stn_key_length(&s, 0.1, 0.0, 1.0).is_err());
        assert!(stn_key_length(&s, 0.1, 0.1, -1.0).is_err());
        assert!(tn_key_length(&s, 1.1, 0.1, 1.0).is_err());
    }
}
