//! Simulation laboratory for learning reserve prices in repeated second-price
//! auctions whose bidder distributions change over time.
//!
//! The seller's problem reduces to a *one-sided full-information bandit*:
//! announcing a grid price reveals the payment at every grid price at or above
//! it, because those payments depend only on the bids that cleared the
//! announced reserve. The [`bandit`] module implements an elimination engine
//! for that feedback model with randomized replay phases and a restart test
//! that reacts to distribution shifts. Around it sit:
//!
//! * [`auction`] — payment rule, per-round reward vectors over a price grid,
//!   exact expected revenue, and the censored-observation reduction;
//! * [`env`] — non-stationary environment generators (piecewise switching,
//!   bounded-variation drift, and randomized worst-case families);
//! * [`analysis`] — switch counts, variation measures, interval partitions,
//!   pseudo-regret curves, and a concentration diagnostic for realized draws;
//! * [`harness`] — reproducible experiment runner with derived RNG streams,
//!   JSON configs, CSV/JSON artifacts, and baseline policies.
//!
//! Shared vocabulary types ([`Arm`], [`RewardSuffix`]) are re-exported here.

pub mod analysis;
pub mod auction;
pub mod bandit;
pub mod env;
pub mod harness;

pub use bandit::{AlgorithmConfig, Arm, ElimNs, LogTermMode, RewardSuffix, SigmaScanMode};

/// Unified error type for construction, validation, and I/O failures.
///
/// Internal invariant breaks (states the algorithm's own guarantees rule out)
/// are raised as panics, not as `Error` values.
#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("arm indices are 1-based; 0 is not a valid arm")]
    InvalidArm,
    #[error("arm {arm} out of range: this instance has {num_arms} arms")]
    ArmOutOfRange { arm: usize, num_arms: usize },
    #[error("a value vector needs at least one bidder")]
    EmptyValues,
    #[error("bidder value {value} outside [0, 1]")]
    ValueOutOfRange { value: f64 },
    #[error("a price grid needs at least one price")]
    EmptyGrid,
    #[error("horizon must be at least 1")]
    ZeroHorizon,
    #[error("grid prices must be strictly increasing and within [0, 1]")]
    BadGrid,
    #[error("a distribution needs at least one atom")]
    EmptyDistribution,
    #[error("atom probability {probability} is not positive and finite")]
    BadAtomProbability { probability: f64 },
    #[error("atom probabilities sum to {total}, not 1")]
    UnnormalizedDistribution { total: f64 },
    #[error("atoms disagree on bidder count: expected {expected}, found {found}")]
    MixedBidderCounts { expected: usize, found: usize },
    #[error("mixture weight {weight} outside [0, 1]")]
    BadMixtureWeight { weight: f64 },
    #[error("invalid algorithm configuration: {0}")]
    InvalidAlgorithmConfig(String),
    #[error("invalid schedule: {0}")]
    InvalidSchedule(String),
    #[error("invalid experiment configuration: {0}")]
    InvalidExperiment(String),
    #[error("reward {value} outside [0, 1]")]
    RewardOutOfRange { value: f64 },
    #[error("a reward suffix needs at least one entry")]
    EmptySuffix,
    #[error("reward suffix starts at arm {found}, but observations must start at or below arm {expected}")]
    SuffixMismatch { expected: usize, found: usize },
    #[error("reward suffix ends at arm {found}, expected coverage through arm {expected}")]
    IncompleteSuffix { expected: usize, found: usize },
    #[error("expected observations for round {expected}, got round {found}")]
    RoundOutOfOrder { expected: usize, found: usize },
    #[error("the run already reached its horizon")]
    RunFinished,
    #[error("round {round} outside the horizon 1..={horizon}")]
    RoundOutOfRange { round: usize, horizon: usize },
    #[error("window [{start}, {end}) is empty or outside the current epoch")]
    BadWindow { start: usize, end: usize },
    #[error("arm {arm} is missing observations inside [{start}, {end})")]
    MissingObservations {
        arm: usize,
        start: usize,
        end: usize,
    },
    #[error("partition budget {c3} outside (0, 0.5]")]
    BadPartitionBudget { c3: f64 },
    #[error("invalid mean sequence: {0}")]
    InvalidMeans(String),
    #[error("invalid state snapshot: {0}")]
    InvalidSnapshot(String),
    #[error(
        "refusing to overwrite {path}: existing config digest {existing} != {new} (pass --force to override)"
    )]
    DigestMismatch {
        path: String,
        existing: String,
        new: String,
    },
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
    #[error(transparent)]
    Csv(#[from] csv::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
