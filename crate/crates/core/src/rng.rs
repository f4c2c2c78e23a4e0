//! Deterministic per-stream random generators.
//!
//! Every random draw in a simulation comes from a ChaCha8 stream keyed by
//! the master seed and addressed by (trial, link, stage). Adding links or
//! stages never shifts the draws of any other stream, and the result does
//! not depend on how trials are scheduled across threads.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// Which part of a trial a stream feeds.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
#[repr(u8)]
pub enum Stage {
    SenderBasis = 0,
    ReceiverBasis = 1,
    SenderBits = 2,
    ChannelNoise = 3,
    Sampling = 4,
    NoiseEstimate = 5,
    PrivacyAmplification = 6,
}

const MAX_LINKS: u32 = 1 << 16;

/// Generator for one (trial, link, stage) stream under `seed`.
pub fn stream(seed: u64, trial: u64, link: u32, stage: Stage) -> ChaCha8Rng {
    assert!(link < MAX_LINKS, "link index {link} exceeds {MAX_LINKS}");
    assert!(trial < 1 << 40, "trial index {trial} exceeds 2^40");
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream((trial << 24) | (u64::from(link) << 8) | stage as u64);
    rng
}

/// Fixed-point threshold for Bernoulli draws from a single `u32`.
#[inline]
pub(crate) fn bernoulli_threshold(p: f64) -> u64 {
    (p.clamp(0.0, 1.0) * 4_294_967_296.0).round() as u64
}
