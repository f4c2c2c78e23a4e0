//! Classical sampling strategies and their failure probabilities.
//!
//! A strategy observes a uniformly random size-`m` subset `t` of positions
//! and uses the relative weight there as a guess for the weight of the
//! rest. A word is *good* for `t` when the two differ by at most `delta`.
//! The STN strategy only sees the XOR of all segments, so its failure
//! probability equals that of the plain Hamming-weight strategy applied to
//! the folded word.

use std::sync::Arc;

use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::bitmath::{BitString, IndexSubset};
use crate::error::{Error, Result};
use crate::registry::{Named, Registry};
use crate::rng::{stream, Stage};
use crate::stats::Estimate;

/// Largest number of subsets [`exact_failure_counts`] will enumerate.
pub const ENUMERATION_LIMIT: u64 = 100_000_000;

const MC_CHUNK: u64 = 4096;

/// Relative boundary slack for `|w_t - w_rest| <= delta`, so that decimal
/// deltas such as 0.05 land on the inclusive side of exact ties.
const TIE_SLACK: f64 = 1e-12;

/// Whether `ones_in_t` ones among `m` sampled positions (out of `total_ones`
/// in a word of length `n`) keep the two relative weights within `delta`.
#[inline]
fn within_delta(ones_in_t: u64, total_ones: u64, m: u64, n: u64, delta: f64) -> bool {
    let rest = n - m;
    let lhs = (ones_in_t as i128 * rest as i128 - (total_ones - ones_in_t) as i128 * m as i128)
        .unsigned_abs() as f64;
    lhs <= delta * (m as f64) * (rest as f64) * (1.0 + TIE_SLACK)
}

/// A classical sampling strategy over a tuple of equal-length segments.
pub trait SamplingStrategy: Named + Send + Sync {
    /// The single word whose sampled weight is compared against the rest.
    fn observed_word(&self, segments: &[BitString]) -> Result<BitString>;

    fn is_good(&self, segments: &[BitString], t: &IndexSubset, delta: f64) -> Result<bool> {
        let word = self.observed_word(segments)?;
        let n = word.len();
        if t.parent_len() != n {
            return Err(Error::LengthMismatch {
                expected: n,
                actual: t.parent_len(),
            });
        }
        if t.is_empty() || t.len() >= n {
            return Err(Error::SubsetSize {
                expected: n / 2,
                actual: t.len(),
            });
        }
        let ones_in_t = t.indices().iter().filter(|&&i| word.get(i)).count() as u64;
        Ok(within_delta(
            ones_in_t,
            word.count_ones(),
            t.len() as u64,
            n as u64,
            delta,
        ))
    }
}

/// Hamming-weight strategy on a single word.
#[derive(Debug, Clone, Copy, Default)]
pub struct HammingWeight;

impl Named for HammingWeight {
    fn name(&self) -> &str {
        "hw"
    }
}

impl SamplingStrategy for HammingWeight {
    fn observed_word(&self, segments: &[BitString]) -> Result<BitString> {
        match segments {
            [q] => Ok(q.clone()),
            _ => Err(Error::LengthMismatch {
                expected: 1,
                actual: segments.len(),
            }),
        }
    }
}

/// STN strategy: only the XOR of all segments is visible.
#[derive(Debug, Clone, Copy, Default)]
pub struct StnParity;

impl Named for StnParity {
    fn name(&self) -> &str {
        "stn"
    }
}

impl SamplingStrategy for StnParity {
    fn observed_word(&self, segments: &[BitString]) -> Result<BitString> {
        let (first, rest) = segments.split_first().ok_or(Error::Empty)?;
        let mut acc = first.clone();
        for s in rest {
            acc.xor_assign(s)?;
        }
        Ok(acc)
    }
}

pub fn sampling_registry() -> Registry<dyn SamplingStrategy> {
    let mut reg: Registry<dyn SamplingStrategy> = Registry::new("sampling");
    reg.register(Arc::new(HammingWeight))
        .register(Arc::new(StnParity));
    reg
}

/// Segments `(r0, l1, r1, ..., lp, rp, l_{p+1})` with the sampling setup.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SamplingInstance {
    segments: Vec<BitString>,
    stns: u32,
    delta: f64,
    m: usize,
}

impl SamplingInstance {
    pub fn new(segments: Vec<BitString>, stns: u32, delta: f64, m: usize) -> Result<Self> {
        let expected = 2 * stns as usize + 2;
        if segments.len() != expected {
            return Err(Error::LengthMismatch {
                expected,
                actual: segments.len(),
            });
        }
        let n = segments[0].len();
        if let Some(bad) = segments.iter().find(|s| s.len() != n) {
            return Err(Error::LengthMismatch {
                expected: n,
                actual: bad.len(),
            });
        }
        check_sizes(n as u64, m as u64, delta)?;
        Ok(Self {
            segments,
            stns,
            delta,
            m,
        })
    }

    /// An instance whose folded word is `folded`: Alice holds it, every other segment is zero.
    pub fn from_folded(folded: BitString, stns: u32, delta: f64, m: usize) -> Result<Self> {
        let n = folded.len();
        let mut segments = vec![folded];
        segments.extend((1..2 * stns as usize + 2).map(|_| BitString::zeros(n)));
        Self::new(segments, stns, delta, m)
    }

    pub fn len(&self) -> usize {
        self.segments[0].len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn segments(&self) -> &[BitString] {
        &self.segments
    }

    pub fn stns(&self) -> u32 {
        self.stns
    }

    pub fn delta(&self) -> f64 {
        self.delta
    }

    pub fn sample_size(&self) -> usize {
        self.m
    }

    /// `r0 ^ (l1 ^ r1) ^ ... ^ (lp ^ rp) ^ l_{p+1}`.
    pub fn folded(&self) -> BitString {
        StnParity
            .observed_word(&self.segments)
            .expect("segments validated at construction")
    }
}

fn check_sizes(n: u64, m: u64, delta: f64) -> Result<()> {
    if delta.is_nan() || delta <= 0.0 {
        return Err(Error::Domain {
            name: "delta",
            value: delta,
            domain: "(0, inf)",
        });
    }
    if m == 0 || m > n / 2 {
        return Err(Error::SubsetSize {
            expected: (n / 2) as usize,
            actual: m as usize,
        });
    }
    Ok(())
}

/// Membership of the instance in the STN good-word set for subset `t`.
pub fn good_word_membership(inst: &SamplingInstance, t: &IndexSubset) -> Result<bool> {
    if t.len() != inst.m {
        return Err(Error::SubsetSize {
            expected: inst.m,
            actual: t.len(),
        });
    }
    StnParity.is_good(&inst.segments, t, inst.delta)
}

/// `min(1, 2 exp(-delta^2 m N / (N + 2)))`.
pub fn analytic_failure_bound(n: u64, m: u64, delta: f64) -> Result<f64> {
    check_sizes(n, m, delta)?;
    let n = n as f64;
    Ok((2.0 * (-delta * delta * m as f64 * n / (n + 2.0)).exp()).min(1.0))
}

/// `C(n, k)`, saturating at `u64::MAX`.
pub fn binomial(n: u64, k: u64) -> u64 {
    if k > n {
        return 0;
    }
    let k = k.min(n - k);
    let mut acc: u128 = 1;
    for i in 0..k {
        acc = acc * u128::from(n - i) / u128::from(i + 1);
        if acc > u128::from(u64::MAX) {
            return u64::MAX;
        }
    }
    acc as u64
}

/// Exact count of bad subsets out of all `C(N, m)`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct FailureCount {
    pub failing: u64,
    pub total: u64,
}

impl FailureCount {
    pub fn probability(&self) -> f64 {
        self.failing as f64 / self.total as f64
    }
}

/// Walks every size-`m` subset of the folded word and counts the bad ones.
pub fn exact_failure_counts(inst: &SamplingInstance) -> Result<FailureCount> {
    let n = inst.len();
    let m = inst.m;
    let total = binomial(n as u64, m as u64);
    if total > ENUMERATION_LIMIT {
        return Err(Error::InstanceTooLarge {
            n,
            m,
            limit: ENUMERATION_LIMIT,
        });
    }
    let word: Vec<u64> = inst.folded().iter().map(u64::from).collect();
    let total_ones: u64 = word.iter().sum();

    let mut idx: Vec<usize> = (0..m).collect();
    let mut ones: u64 = idx.iter().map(|&i| word[i]).sum();
    let mut failing = 0u64;
    loop {
        if !within_delta(ones, total_ones, m as u64, n as u64, inst.delta) {
            failing += 1;
        }
        // advance to the next combination in lexicographic order
        let Some(pos) = (0..m).rev().find(|&i| idx[i] < n - m + i) else {
            break;
        };
        for &i in &idx[pos..] {
            ones -= word[i];
        }
        idx[pos] += 1;
        for i in pos + 1..m {
            idx[i] = idx[i - 1] + 1;
        }
        for &i in &idx[pos..] {
            ones += word[i];
        }
    }
    Ok(FailureCount { failing, total })
}

/// Fraction of size-`m` subsets for which the instance is not a good word.
pub fn exact_failure_probability(inst: &SamplingInstance) -> Result<f64> {
    exact_failure_counts(inst).map(|c| c.probability())
}

/// Exact failure probability for a representative folded word of every weight `0..=N`.
pub fn failure_by_weight(n: usize, m: usize, delta: f64, stns: u32) -> Result<Vec<f64>> {
    check_sizes(n as u64, m as u64, delta)?;
    if binomial(n as u64, m as u64) > ENUMERATION_LIMIT {
        return Err(Error::InstanceTooLarge {
            n,
            m,
            limit: ENUMERATION_LIMIT,
        });
    }
    (0..=n)
        .map(|wt| {
            let word = BitString::from_bits((0..n).map(|i| i < wt));
            let inst = SamplingInstance::from_folded(word, stns, delta, m)?;
            exact_failure_probability(&inst)
        })
        .collect()
}

/// `max_q Pr(q not good)`, using that the probability depends on the folded word only through its weight.
pub fn worst_case_failure(n: usize, m: usize, delta: f64, stns: u32) -> Result<f64> {
    Ok(failure_by_weight(n, m, delta, stns)?
        .into_iter()
        .fold(0.0, f64::max))
}

/// Monte Carlo failure estimate over uniformly random subsets, with a 99% Wilson interval.
pub fn mc_failure_estimate(inst: &SamplingInstance, trials: u64, seed: u64) -> Result<Estimate> {
    if trials < 1000 {
        return Err(Error::Domain {
            name: "trials",
            value: trials as f64,
            domain: ">= 1000",
        });
    }
    let word: Vec<u8> = inst.folded().iter().map(u8::from).collect();
    let n = word.len();
    let m = inst.m;
    let total_ones: u64 = word.iter().map(|&b| u64::from(b)).sum();
    let chunks = trials.div_ceil(MC_CHUNK);

    let failing: u64 = (0..chunks)
        .into_par_iter()
        .map(|chunk| {
            let mut rng = stream(seed, chunk, 0, Stage::Sampling);
            let mut perm: Vec<u32> = (0..n as u32).collect();
            let count = MC_CHUNK.min(trials - chunk * MC_CHUNK);
            let mut bad = 0u64;
            for _ in 0..count {
                // partial Fisher-Yates: perm[..m] becomes a uniform m-subset
                let mut ones = 0u64;
                for i in 0..m {
                    let j = rng.random_range(i..n);
                    perm.swap(i, j);
                    ones += u64::from(word[perm[i] as usize]);
                }
                if !within_delta(ones, total_ones, m as u64, n as u64, inst.delta) {
                    bad += 1;
                }
            }
            bad
        })
        .sum();
    Ok(Estimate::wilson99(failing, trials))
}
