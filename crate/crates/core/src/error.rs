use thiserror::Error;

/// Errors produced by the analysis and simulation routines.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("{name} = {value} is outside its domain {domain}")]
    Domain {
        name: &'static str,
        value: f64,
        domain: &'static str,
    },

    #[error("length mismatch: expected {expected}, got {actual}")]
    LengthMismatch { expected: usize, actual: usize },

    #[error("empty bit string")]
    Empty,

    #[error("index {index} out of range for length {len}")]
    IndexOutOfRange { index: usize, len: usize },

    #[error("subset indices must be strictly increasing")]
    UnsortedSubset,

    #[error("subset has {actual} elements, expected {expected}")]
    SubsetSize { expected: usize, actual: usize },

    #[error("infeasible parameters: {0}")]
    Infeasible(String),

    #[error("authentication pool exhausted: initial pool {pool} <= per-use cost {per_use}")]
    PoolExhausted { pool: f64, per_use: f64 },

    #[error("instance too large to enumerate: C({n}, {m}) exceeds {limit}")]
    InstanceTooLarge { n: usize, m: usize, limit: u64 },

    #[error("desk-scale guard: N = {n} exceeds the simulator limit {limit}")]
    Guard { n: u64, limit: u64 },

    #[error("transcript aborted at link {link}: {check}")]
    Aborted { link: usize, check: String },

    #[error("unknown {family} strategy `{name}`")]
    UnknownStrategy { family: &'static str, name: String },
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn check_unit(name: &'static str, value: f64) -> Result<()> {
    if (0.0..=1.0).contains(&value) {
        Ok(())
    } else {
        Err(Error::Domain {
            name,
            value,
            domain: "[0, 1]",
        })
    }
}
