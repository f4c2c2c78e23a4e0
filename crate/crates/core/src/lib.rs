//! Finite-key analysis of quantum key distribution chains built from
//! simplified trusted nodes (STNs) and regular trusted nodes (TNs).
//!
//! * [`params`] derives block sizes and statistical tolerances,
//! * [`rates`] gives closed-form key lengths,
//! * [`cost`] prices a secret bit for either architecture,
//! * [`sampling`] audits the classical sampling bound behind the STN proof,
//! * [`chainsim`] simulates the chain protocol end to end.
//!
//! Interchangeable pieces (architectures, EC/auth cost models, sampling
//! strategies, error correctors) are traits collected in name-keyed
//! [`registry::Registry`] values.

pub mod arch;
pub mod bitmath;
pub mod chainsim;
pub mod cost;
pub mod error;
pub mod params;
pub mod privacy;
pub mod rates;
pub mod registry;
pub mod rng;
pub mod sampling;
pub mod stats;

pub use arch::{architecture_registry, ChainArchitecture};
pub use bitmath::{binary_entropy, relative_weight, xor_fold, BitString, IndexSubset};
pub use chainsim::{
    distill_key, estimate_total_noise_mc, simulate_chain, simulate_trials, AbortPolicy,
    ChainTranscript, DistilledKey, SimConfig,
};
pub use cost::{
    cost_crossover, cost_stn, cost_tn, evaluate_costs, refresh_interval, CostModel, CostResult,
};
pub use error::{Error, Result};
pub use params::{derive_sizes, failure_probability, pa_epsilon, DerivedSizes, ProtocolParams};
pub use rates::{
    asymptotic_stn_rate, stn_key_length, stn_total_noise, tn_key_length, KeyRateResult,
};
pub use sampling::{
    analytic_failure_bound, exact_failure_probability, good_word_membership, mc_failure_estimate,
    worst_case_failure, SamplingInstance,
};
pub use stats::Estimate;
