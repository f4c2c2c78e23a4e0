//! Seeded Monte Carlo simulation of a prepare-and-measure STN chain.
//!
//! Each of the `p + 1` links is simulated independently: both ends pick
//! bases (X with probability `px`), positions with mismatched bases are
//! sifted out, and every surviving position is flipped with probability
//! `Q`. Intermediate nodes broadcast the XOR of their left and right raw
//! strings; Bob folds the broadcasts into his own data so that, absent
//! noise, his folded string is Alice's.
//!
//! The eavesdropper is honest but noisy here. The simulator checks that the
//! protocol is complete and correct; secrecy comes from the closed-form bound.

use std::sync::Arc;

use rand::RngCore;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::bitmath::{relative_weight, BitString};
use crate::error::{Error, Result};
use crate::params::{derive_sizes, DerivedSizes, ProtocolParams};
use crate::privacy::ToeplitzHash;
use crate::rates::{stn_key_length, KeyRateResult};
use crate::registry::{Named, Registry};
use crate::rng::{bernoulli_threshold, stream, Stage};
use crate::stats::Estimate;

/// Largest `N` the simulator accepts.
pub const MAX_SIM_SIGNALS: u64 = 10_000_000;

const NOISE_MC_CHUNK: u64 = 1 << 16;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum AbortPolicy {
    /// Abort if any link keeps fewer than `N~` rounds or the common blocks
    /// fall below the derived `n0` / `m0`.
    #[default]
    PaperAbort,
    /// Never abort on sizes; only an empty block stops the run.
    ObserveOnly,
}

impl std::str::FromStr for AbortPolicy {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "paper-abort" | "paper" => Ok(Self::PaperAbort),
            "observe-only" | "observe" => Ok(Self::ObserveOnly),
            other => Err(Error::UnknownStrategy {
                family: "abort-policy",
                name: other.to_owned(),
            }),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SimConfig {
    pub params: ProtocolParams,
    pub seed: u64,
    pub trials: u64,
    pub abort_policy: AbortPolicy,
}

impl SimConfig {
    pub fn validate(&self) -> Result<()> {
        self.params.validate()?;
        if self.trials == 0 {
            return Err(Error::Domain {
                name: "trials",
                value: 0.0,
                domain: ">= 1",
            });
        }
        if self.params.signals > MAX_SIM_SIGNALS {
            return Err(Error::Guard {
                n: self.params.signals,
                limit: MAX_SIM_SIGNALS,
            });
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum AbortCheck {
    SiftedBelowNTilde,
    KeyBlockBelowN0,
    TestBlockBelowM0,
    EmptyBlock,
}

impl std::fmt::Display for AbortCheck {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Self::SiftedBelowNTilde => "sifted-below-n-tilde",
            Self::KeyBlockBelowN0 => "key-block-below-n0",
            Self::TestBlockBelowM0 => "test-block-below-m0",
            Self::EmptyBlock => "empty-block",
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct AbortFlag {
    pub link: usize,
    pub check: AbortCheck,
}

/// Per-link sifting outcome.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct LinkCounts {
    /// `N^i`, rounds kept after sifting.
    pub sifted: u64,
    /// `n^i`, Z-basis rounds.
    pub z_count: u64,
    /// `m^i`, X-basis rounds.
    pub x_count: u64,
}

/// One simulated protocol run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChainTranscript {
    pub trial: u64,
    pub signals: u64,
    pub links: Vec<LinkCounts>,
    /// Common key block size, the minimum Z count over all links.
    pub n0_obs: u64,
    /// Common test block size, the minimum X count over all links.
    pub m0_obs: u64,
    /// Z-basis parity broadcast of every intermediate node.
    pub stn_z_parities: Vec<BitString>,
    /// X-basis parity broadcast of every intermediate node.
    pub stn_x_parities: Vec<BitString>,
    pub alice_raw_key: BitString,
    pub alice_test: BitString,
    pub bob_folded_key: BitString,
    pub bob_folded_test: BitString,
    /// Relative weight of `alice_test ^ bob_folded_test`.
    pub w_obs: Option<f64>,
    pub abort: Option<AbortFlag>,
    /// Simulator ground truth: XOR of all link error patterns on the key block.
    pub key_error_pattern: BitString,
    /// Same, on the test block.
    pub test_error_pattern: BitString,
}

impl ChainTranscript {
    pub fn aborted(&self) -> bool {
        self.abort.is_some()
    }

    /// `N^i / N` for every link.
    pub fn sifted_fractions(&self) -> Vec<f64> {
        self.links
            .iter()
            .map(|l| l.sifted as f64 / self.signals as f64)
            .collect()
    }
}

/// Raw strings of one link, in sifted order.
struct LinkData {
    counts: LinkCounts,
    sender_z: BitString,
    receiver_z: BitString,
    sender_x: BitString,
    receiver_x: BitString,
    errors_z: BitString,
    errors_x: BitString,
}

fn simulate_link(params: &ProtocolParams, seed: u64, trial: u64, link: u32) -> LinkData {
    let n = params.signals as usize;
    let basis_thr = bernoulli_threshold(params.px);
    let noise_thr = bernoulli_threshold(params.link_noise);
    let mut sender_basis = stream(seed, trial, link, Stage::SenderBasis);
    let mut receiver_basis = stream(seed, trial, link, Stage::ReceiverBasis);
    let mut sender_bits = stream(seed, trial, link, Stage::SenderBits);
    let mut channel = stream(seed, trial, link, Stage::ChannelNoise);

    let expect_x = (n as f64 * params.px * params.px * 1.1) as usize + 64;
    let mut data = LinkData {
        counts: LinkCounts {
            sifted: 0,
            z_count: 0,
            x_count: 0,
        },
        sender_z: BitString::with_capacity(n),
        receiver_z: BitString::with_capacity(n),
        sender_x: BitString::with_capacity(expect_x),
        receiver_x: BitString::with_capacity(expect_x),
        errors_z: BitString::with_capacity(n),
        errors_x: BitString::with_capacity(expect_x),
    };

    let mut bit_word = 0u64;
    for j in 0..n {
        if j % 64 == 0 {
            bit_word = sender_bits.next_u64();
        }
        let sent = (bit_word >> (j % 64)) & 1 == 1;
        let theta = u64::from(sender_basis.next_u32()) < basis_thr;
        let psi = u64::from(receiver_basis.next_u32()) < basis_thr;
        if theta != psi {
            continue;
        }
        let flip = u64::from(channel.next_u32()) < noise_thr;
        let received = sent ^ flip;
        data.counts.sifted += 1;
        if theta {
            data.counts.x_count += 1;
            data.sender_x.push(sent);
            data.receiver_x.push(received);
            data.errors_x.push(flip);
        } else {
            data.counts.z_count += 1;
            data.sender_z.push(sent);
            data.receiver_z.push(received);
            data.errors_z.push(flip);
        }
    }
    data
}

/// XOR of two strings after cutting the longer one down to the shorter.
fn parity(left: &BitString, right: &BitString) -> BitString {
    let len = left.len().min(right.len());
    let mut out = left.truncated(len);
    out.xor_assign(&right.truncated(len))
        .expect("equal lengths after truncation");
    out
}

fn fold(base: &BitString, parities: &[BitString], len: usize) -> BitString {
    let mut acc = base.truncated(len);
    for p in parities {
        acc.xor_assign(&p.truncated(len))
            .expect("all parities are at least the common length");
    }
    acc
}

/// Runs trial `trial` of `cfg`. Deterministic in `(cfg, trial)`.
pub fn simulate_chain(cfg: &SimConfig, trial: u64) -> Result<ChainTranscript> {
    cfg.validate()?;
    let params = &cfg.params;
    let expected = match cfg.abort_policy {
        AbortPolicy::PaperAbort => Some(derive_sizes(params)?),
        AbortPolicy::ObserveOnly => None,
    };

    let links: Vec<LinkData> = (0..=params.stns)
        .map(|i| simulate_link(params, cfg.seed, trial, i))
        .collect();
    let counts: Vec<LinkCounts> = links.iter().map(|l| l.counts).collect();

    // Node i (1..=p) holds the receiver side of link i-1 and the sender side of link i.
    let stn_z_parities: Vec<BitString> = links
        .windows(2)
        .map(|w| parity(&w[0].receiver_z, &w[1].sender_z))
        .collect();
    let stn_x_parities: Vec<BitString> = links
        .windows(2)
        .map(|w| parity(&w[0].receiver_x, &w[1].sender_x))
        .collect();

    let n0_obs = counts.iter().map(|c| c.z_count).min().unwrap_or(0);
    let m0_obs = counts.iter().map(|c| c.x_count).min().unwrap_or(0);
    let (n0, m0) = (n0_obs as usize, m0_obs as usize);

    let alice = &links[0];
    let bob = &links[links.len() - 1];
    let alice_raw_key = alice.sender_z.truncated(n0);
    let alice_test = alice.sender_x.truncated(m0);
    let bob_folded_key = fold(&bob.receiver_z, &stn_z_parities, n0);
    let bob_folded_test = fold(&bob.receiver_x, &stn_x_parities, m0);

    let errors_z: Vec<BitString> = links.iter().map(|l| l.errors_z.clone()).collect();
    let errors_x: Vec<BitString> = links.iter().map(|l| l.errors_x.clone()).collect();
    let key_error_pattern = fold(&errors_z[0], &errors_z[1..], n0);
    let test_error_pattern = fold(&errors_x[0], &errors_x[1..], m0);

    let w_obs = if m0 > 0 {
        Some(relative_weight(&alice_test.xor(&bob_folded_test)?)?)
    } else {
        None
    };

    let abort = find_abort(&counts, n0_obs, m0_obs, expected.as_ref());

    Ok(ChainTranscript {
        trial,
        signals: params.signals,
        links: counts,
        n0_obs,
        m0_obs,
        stn_z_parities,
        stn_x_parities,
        alice_raw_key,
        alice_test,
        bob_folded_key,
        bob_folded_test,
        w_obs,
        abort,
        key_error_pattern,
        test_error_pattern,
    })
}

fn find_abort(
    counts: &[LinkCounts],
    n0_obs: u64,
    m0_obs: u64,
    expected: Option<&DerivedSizes>,
) -> Option<AbortFlag> {
    let argmin = |f: fn(&LinkCounts) -> u64| {
        counts
            .iter()
            .enumerate()
            .min_by_key(|(_, c)| f(c))
            .map_or(0, |(i, _)| i)
    };
    if n0_obs == 0 || m0_obs == 0 {
        let link = if n0_obs == 0 {
            argmin(|c| c.z_count)
        } else {
            argmin(|c| c.x_count)
        };
        return Some(AbortFlag {
            link,
            check: AbortCheck::EmptyBlock,
        });
    }
    let sizes = expected?;
    if let Some(link) = counts
        .iter()
        .position(|c| (c.sifted as f64) < sizes.n_tilde)
    {
        return Some(AbortFlag {
            link,
            check: AbortCheck::SiftedBelowNTilde,
        });
    }
    if n0_obs < sizes.n0 {
        return Some(AbortFlag {
            link: argmin(|c| c.z_count),
            check: AbortCheck::KeyBlockBelowN0,
        });
    }
    if m0_obs < sizes.m0 {
        return Some(AbortFlag {
            link: argmin(|c| c.x_count),
            check: AbortCheck::TestBlockBelowM0,
        });
    }
    None
}

/// Runs trials `0..cfg.trials` in parallel, returned in trial order.
pub fn simulate_trials(cfg: &SimConfig) -> Result<Vec<ChainTranscript>> {
    cfg.validate()?;
    (0..cfg.trials)
        .into_par_iter()
        .map(|t| simulate_chain(cfg, t))
        .collect()
}

/// Reconciles Bob's raw key with Alice's.
pub trait ErrorCorrector: Named + Send + Sync {
    fn reconcile(&self, alice: &BitString, bob: &BitString) -> Result<BitString>;
}

/// Idealized error correction: Bob ends up with Alice's key. The leakage is
/// charged by the ledger, not computed from an actual syndrome.
#[derive(Debug, Clone, Copy, Default)]
pub struct IdealCorrection;

impl Named for IdealCorrection {
    fn name(&self) -> &str {
        "ideal"
    }
}

impl ErrorCorrector for IdealCorrection {
    fn reconcile(&self, alice: &BitString, bob: &BitString) -> Result<BitString> {
        if alice.len() != bob.len() {
            return Err(Error::LengthMismatch {
                expected: alice.len(),
                actual: bob.len(),
            });
        }
        Ok(alice.clone())
    }
}

pub fn error_corrector_registry() -> Registry<dyn ErrorCorrector> {
    let mut reg: Registry<dyn ErrorCorrector> = Registry::new("error-correction");
    reg.register(Arc::new(IdealCorrection));
    reg
}

/// Accounting for one distillation.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DistillLedger {
    pub n0_obs: u64,
    pub m0_obs: u64,
    pub w_obs: f64,
    /// Sampling tolerance recomputed from the observed block sizes.
    pub delta: f64,
    /// Bits charged for error correction, `f n0 h(w_obs + delta)`.
    pub leakage: f64,
    pub key: KeyRateResult,
}

impl DistillLedger {
    /// Key-rate inputs for a transcript, without hashing anything.
    pub fn for_transcript(
        transcript: &ChainTranscript,
        params: &ProtocolParams,
        ec_efficiency: f64,
    ) -> Result<Self> {
        if let Some(flag) = transcript.abort {
            return Err(Error::Aborted {
                link: flag.link,
                check: flag.check.to_string(),
            });
        }
        let w_obs = transcript.w_obs.ok_or(Error::Aborted {
            link: 0,
            check: AbortCheck::EmptyBlock.to_string(),
        })?;
        let sizes = DerivedSizes::observed(params, transcript.m0_obs, transcript.n0_obs)?;
        let key = stn_key_length(&sizes, w_obs, params.eps, ec_efficiency)?;
        Ok(Self {
            n0_obs: transcript.n0_obs,
            m0_obs: transcript.m0_obs,
            w_obs,
            delta: sizes.delta,
            leakage: key.leakage,
            key,
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DistilledKey {
    pub alice_key: BitString,
    pub bob_key: BitString,
    pub ledger: DistillLedger,
    /// False when the ledger leaves no key; both keys are then empty.
    pub feasible: bool,
}

/// Error correction with [`IdealCorrection`] followed by Toeplitz privacy amplification.
pub fn distill_key(
    transcript: &ChainTranscript,
    params: &ProtocolParams,
    seed: u64,
) -> Result<DistilledKey> {
    distill_key_with(transcript, params, seed, &IdealCorrection, 1.0)
}

pub fn distill_key_with(
    transcript: &ChainTranscript,
    params: &ProtocolParams,
    seed: u64,
    corrector: &dyn ErrorCorrector,
    ec_efficiency: f64,
) -> Result<DistilledKey> {
    let ledger = DistillLedger::for_transcript(transcript, params, ec_efficiency)?;
    let out_len = ledger.key.key_length_clamped as usize;
    if out_len == 0 {
        return Ok(DistilledKey {
            alice_key: BitString::default(),
            bob_key: BitString::default(),
            ledger,
            feasible: false,
        });
    }
    let corrected = corrector.reconcile(&transcript.alice_raw_key, &transcript.bob_folded_key)?;
    let mut rng = stream(seed, transcript.trial, 0, Stage::PrivacyAmplification);
    let hash = ToeplitzHash::random(out_len, transcript.alice_raw_key.len(), &mut rng);
    Ok(DistilledKey {
        alice_key: hash.hash(&transcript.alice_raw_key)?,
        bob_key: hash.hash(&corrected)?,
        ledger,
        feasible: true,
    })
}

/// Monte Carlo frequency of an odd number of Bernoulli(`Q`) flips over `p + 1` links.
pub fn estimate_total_noise_mc(
    link_noise: f64,
    stns: u32,
    trials: u64,
    seed: u64,
) -> Result<Estimate> {
    if !(0.0..=0.5).contains(&link_noise) {
        return Err(Error::Domain {
            name: "Q",
            value: link_noise,
            domain: "[0, 0.5]",
        });
    }
    if trials < 10_000 {
        return Err(Error::Domain {
            name: "trials",
            value: trials as f64,
            domain: ">= 10000",
        });
    }
    let thr = bernoulli_threshold(link_noise);
    let chunks = trials.div_ceil(NOISE_MC_CHUNK);
    let odd: u64 = (0..chunks)
        .into_par_iter()
        .map(|chunk| {
            let mut rng = stream(seed, chunk, 0, Stage::NoiseEstimate);
            let count = NOISE_MC_CHUNK.min(trials - chunk * NOISE_MC_CHUNK);
            let mut hits = 0u64;
            for _ in 0..count {
                let mut par = false;
                for _ in 0..=stns {
                    par ^= u64::from(rng.next_u32()) < thr;
                }
                hits += u64::from(par);
            }
            hits
        })
        .sum();
    Ok(Estimate::wilson99(odd, trials))
}
