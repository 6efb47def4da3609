//! Elimination engine for the one-sided full-information bandit.
//!
//! Playing arm `a` reveals the rewards of every arm with index `≥ a`, so the
//! engine keeps a *frontier* `a_min`: arms below it have been eliminated
//! because some window showed their mean lagging the frontier's by more than a
//! length-dependent threshold. Each elimination freezes an
//! [`EliminationRecord`] (the observed gap and a snapshot of upper-arm means).
//! Randomly inserted [`ExplorationPhase`]s periodically replay an eliminated
//! arm; when a phase completes, the phase-window means are compared against
//! the frozen snapshot, and a large deviation restarts the engine in a fresh
//! epoch. A round proceeds in four steps:
//!
//! 1. [`ElimNs::sample_exploration_phases`] — maybe insert replay phases;
//! 2. [`ElimNs::choose_action`] — play the frontier, or the lowest replayable
//!    eliminated arm while a phase is active;
//! 3. [`ElimNs::record_observations`] + [`ElimNs::elimination_step`] — ingest
//!    the observed reward suffix and advance the frontier;
//! 4. [`ElimNs::nonstationarity_check`] — test completed phases for drift and
//!    restart on a violation.
//!
//! [`ElimNs::advance_round`] composes the four steps in order. All randomness
//! is injected; identical RNG streams replay identical runs.

use std::fmt;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::{Error, Result};

// ---------------------------------------------------------------------------
// Arms and reward suffixes
// ---------------------------------------------------------------------------

/// A 1-based arm index. Arm 1 is the lowest price; arm `K` the highest.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(try_from = "usize", into = "usize")]
pub struct Arm(usize);

impl Arm {
    /// First arm; always valid.
    pub const FIRST: Arm = Arm(1);

    pub fn new(index: usize) -> Result<Self> {
        if index == 0 {
            Err(Error::InvalidArm)
        } else {
            Ok(Arm(index))
        }
    }

    /// The 1-based index.
    pub fn get(self) -> usize {
        self.0
    }

    /// The 0-based index, for slice access.
    pub fn index0(self) -> usize {
        self.0 - 1
    }

    pub fn next(self) -> Arm {
        Arm(self.0 + 1)
    }
}

impl TryFrom<usize> for Arm {
    type Error = Error;
    fn try_from(index: usize) -> Result<Self> {
        Arm::new(index)
    }
}

impl From<Arm> for usize {
    fn from(arm: Arm) -> usize {
        arm.0
    }
}

impl fmt::Display for Arm {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.0)
    }
}

/// Rewards observed in one round: one value per arm from `first` through the
/// last arm, in index order. This is the one-sided feedback object — playing
/// `first` reveals exactly these entries.
#[derive(Debug, Clone, PartialEq)]
pub struct RewardSuffix {
    first: Arm,
    values: Vec<f64>,
}

impl RewardSuffix {
    /// `values[j]` is the reward of arm `first + j`; all in `[0, 1]`.
    pub fn new(first: Arm, values: Vec<f64>) -> Result<Self> {
        if values.is_empty() {
            return Err(Error::EmptySuffix);
        }
        for &v in &values {
            if !(0.0..=1.0).contains(&v) {
                return Err(Error::RewardOutOfRange { value: v });
            }
        }
        Ok(RewardSuffix { first, values })
    }

    pub fn first(&self) -> Arm {
        self.first
    }

    /// Highest arm covered; a full-information suffix has `last() == K`.
    pub fn last(&self) -> Arm {
        Arm(self.first.get() + self.values.len() - 1)
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn get(&self, arm: Arm) -> Option<f64> {
        if arm < self.first {
            None
        } else {
            self.values.get(arm.get() - self.first.get()).copied()
        }
    }

    pub fn iter(&self) -> impl Iterator<Item = (Arm, f64)> + '_ {
        let base = self.first.get();
        self.values
            .iter()
            .enumerate()
            .map(move |(j, &v)| (Arm(base + j), v))
    }
}

// ---------------------------------------------------------------------------
// Configuration
// ---------------------------------------------------------------------------

/// Which logarithmic factor `L` scales thresholds and phase lengths.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LogTermMode {
    /// `L = ln(K·T³)` — the theoretically calibrated factor.
    Full,
    /// `L = ln(T)` — a smaller factor for desk-scale behavioral runs.
    Demo,
}

/// Which window starts `σ` the elimination scan examines each round.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SigmaScanMode {
    /// Every `σ` in `[τ, t]` — O(K·t) per round; used for oracle tests.
    Exact,
    /// `σ ∈ {t+1−2^j : j ≥ 0} ∪ {τ}` — O(K·log t) per round. A window the
    /// exact scan flags at length `n` is caught at some length `≤ 2n`.
    Geometric,
}

/// Tunable constants of the engine.
///
/// The theoretically calibrated regime (`enforce_calibrated_constants`) requires
/// `C1 ≥ 2048, C2 ≥ 32` (switching analysis) or `C1 ≥ 8192, C2 ≥ 128`
/// (dynamic analysis) and pins the restart threshold factor to `1/4`. Those
/// constants make the elimination threshold exceed 1 for every feasible
/// window at desk scale (`T ≤ 10⁵`), so nothing is ever eliminated; the demo
/// constructor exposes small constants for behavioral experiments instead.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AlgorithmConfig {
    /// Round count `T`.
    pub horizon: usize,
    /// Arm count `K`.
    pub num_arms: usize,
    /// Elimination threshold constant `C1` in `√(C1·L/n)`.
    pub c1: f64,
    /// Phase length constant `C2` in `⌈C2·L/d²⌉`.
    pub c2: f64,
    /// Restart threshold factor `θ`: a completed phase restarts the engine
    /// when a snapshot deviation exceeds `θ·d`.
    pub restart_threshold: f64,
    pub log_term_mode: LogTermMode,
    pub sigma_scan_mode: SigmaScanMode,
    /// Reject constants outside the theoretically calibrated regime.
    pub enforce_calibrated_constants: bool,
}

impl AlgorithmConfig {
    /// Small constants for desk-scale behavioral runs: `C1 = C2 = 4`,
    /// `L = ln T`, `θ = 3/4`, geometric scan.
    pub fn demo(horizon: usize, num_arms: usize) -> Self {
        AlgorithmConfig {
            horizon,
            num_arms,
            c1: 4.0,
            c2: 4.0,
            restart_threshold: 0.75,
            log_term_mode: LogTermMode::Demo,
            sigma_scan_mode: SigmaScanMode::Geometric,
            enforce_calibrated_constants: false,
        }
    }

    /// Constants from the switching-regime analysis: `C1 = 2048`, `C2 = 32`,
    /// `L = ln(K·T³)`, `θ = 1/4`.
    pub fn calibrated_switching(horizon: usize, num_arms: usize) -> Self {
        AlgorithmConfig {
            horizon,
            num_arms,
            c1: 2048.0,
            c2: 32.0,
            restart_threshold: 0.25,
            log_term_mode: LogTermMode::Full,
            sigma_scan_mode: SigmaScanMode::Geometric,
            enforce_calibrated_constants: true,
        }
    }

    /// Constants from the dynamic-regime analysis: `C1 = 8192`, `C2 = 128`.
    pub fn calibrated_dynamic(horizon: usize, num_arms: usize) -> Self {
        AlgorithmConfig {
            c1: 8192.0,
            c2: 128.0,
            ..Self::calibrated_switching(horizon, num_arms)
        }
    }

    pub fn validate(&self) -> Result<()> {
        let fail = |reason: &str| Err(Error::InvalidAlgorithmConfig(reason.to_string()));
        if self.horizon == 0 {
            return fail("horizon must be at least 1");
        }
        if self.num_arms == 0 {
            return fail("num_arms must be at least 1");
        }
        if !(self.c1 > 0.0 && self.c1.is_finite()) {
            return fail("c1 must be positive and finite");
        }
        if !(self.c2 > 0.0 && self.c2.is_finite()) {
            return fail("c2 must be positive and finite");
        }
        if !(self.restart_threshold > 0.0 && self.restart_threshold < 1.0) {
            return fail("restart_threshold must lie in (0, 1)");
        }
        if self.enforce_calibrated_constants {
            let switching = self.c1 >= 2048.0 && self.c2 >= 32.0;
            let dynamic = self.c1 >= 8192.0 && self.c2 >= 128.0;
            if !(switching || dynamic) {
                return fail(
                    "calibrated constants require c1 ≥ 2048 and c2 ≥ 32, or c1 ≥ 8192 and c2 ≥ 128",
                );
            }
            if self.restart_threshold != 0.25 {
                return fail("calibrated constants require restart_threshold = 1/4");
            }
        }
        Ok(())
    }

    /// The logarithmic factor `L` for the configured mode.
    pub fn log_term(&self) -> f64 {
        let t = self.horizon as f64;
        match self.log_term_mode {
            LogTermMode::Full => (self.num_arms as f64 * t.powi(3)).ln(),
            LogTermMode::Demo => t.ln(),
        }
    }

    /// Length `⌈C2·L/d²⌉` of a phase at dyadic scale `d = 2^{-exponent}`.
    pub fn phase_length(&self, exponent: u32) -> usize {
        let d = dyadic_scale(exponent);
        (self.c2 * self.log_term() / (d * d)).ceil() as usize
    }

    /// Probability `d·√((ℓ+1)/T)` of inserting a phase at scale `d` while in
    /// epoch `ℓ`.
    pub fn insertion_probability(&self, epoch: usize, exponent: u32) -> f64 {
        dyadic_scale(exponent) * ((epoch as f64 + 1.0) / self.horizon as f64).sqrt()
    }
}

/// `d = 2^{-exponent}`, exact in double precision.
pub fn dyadic_scale(exponent: u32) -> f64 {
    2f64.powi(-(exponent as i32))
}

// ---------------------------------------------------------------------------
// Records, phases, per-round outputs
// ---------------------------------------------------------------------------

/// Frozen at the moment an arm is eliminated: the empirical gap `g` that
/// justified the elimination and a snapshot `v` of the window means of every
/// arm from the eliminated one upward. Completed exploration phases compare
/// fresh means against `v` to detect drift.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EliminationRecord {
    /// Empirical gap `g`: max over arms of (arm mean − eliminated arm mean).
    pub gap: f64,
    /// The eliminated arm `e`.
    pub arm: Arm,
    /// Window means of arms `e..=K`; index 0 is arm `e` itself.
    snapshot: Vec<f64>,
}

impl EliminationRecord {
    pub fn new(arm: Arm, gap: f64, snapshot: Vec<f64>) -> Result<Self> {
        if !(gap > 0.0 && gap.is_finite()) {
            return Err(Error::InvalidSnapshot(format!(
                "record gap {gap} must be positive and finite"
            )));
        }
        if snapshot.is_empty() {
            return Err(Error::InvalidSnapshot(
                "record snapshot must cover the eliminated arm".to_string(),
            ));
        }
        for &v in &snapshot {
            if !(0.0..=1.0).contains(&v) {
                return Err(Error::InvalidSnapshot(format!(
                    "record snapshot mean {v} outside [0, 1]"
                )));
            }
        }
        Ok(EliminationRecord { gap, arm, snapshot })
    }

    /// Snapshot mean of `arm`; `None` below the eliminated arm or past the
    /// snapshot's top arm.
    pub fn snapshot_mean(&self, arm: Arm) -> Option<f64> {
        if arm < self.arm {
            None
        } else {
            self.snapshot.get(arm.get() - self.arm.get()).copied()
        }
    }

    /// `(arm, snapshot mean)` pairs from the eliminated arm upward.
    pub fn snapshot_iter(&self) -> impl Iterator<Item = (Arm, f64)> + '_ {
        let base = self.arm.get();
        self.snapshot
            .iter()
            .enumerate()
            .map(move |(j, &v)| (Arm(base + j), v))
    }
}

/// A scheduled replay window `[start, end_exclusive)` at dyadic scale
/// `d = 2^{-exponent}`. While active it forces play of an eliminated arm
/// whose record gap is `≤ 8d`; on the round it completes, the window means
/// are tested against that record's snapshot.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct ExplorationPhase {
    /// Dyadic exponent `i`; the phase's scale is `d = 2^{-i}`.
    pub exponent: u32,
    /// First covered round (inclusive).
    pub start: usize,
    /// One past the last covered round; the drift test runs at round
    /// `end_exclusive − 1`.
    pub end_exclusive: usize,
}

impl ExplorationPhase {
    pub fn scale(&self) -> f64 {
        dyadic_scale(self.exponent)
    }

    pub fn covers(&self, round: usize) -> bool {
        self.start <= round && round < self.end_exclusive
    }
}

/// What the engine decided to play in one round.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RoundDecision {
    pub round: usize,
    pub arm: Arm,
    /// True when an active phase forced replay of an eliminated arm.
    pub in_exploration: bool,
    /// Largest scale among phases covering this round; `None` outside
    /// exploration.
    pub d_max: Option<f64>,
}

/// State changes produced by the update steps of one round.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct UpdateEvents {
    /// Records created this round, in creation order (lowest arm first).
    pub eliminations: Vec<EliminationRecord>,
    /// True when a completed phase's drift test failed and the engine reset.
    pub restarted: bool,
    /// Start round of the new epoch; present iff `restarted`.
    pub new_epoch_start: Option<usize>,
}

// ---------------------------------------------------------------------------
// Engine
// ---------------------------------------------------------------------------

/// Serializable engine state for checkpoint and replay.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EpochSnapshot {
    pub epoch: usize,
    pub epoch_start: usize,
    pub next_round: usize,
    pub a_min: Arm,
    pub records: Vec<EliminationRecord>,
    pub phases: Vec<ExplorationPhase>,
    /// Per-arm prefix sums of observed rewards over epoch rounds; row `a` has
    /// one leading zero plus one entry per recorded round.
    pub reward_sums: Vec<Vec<f64>>,
    /// Per-arm prefix counts of observations, aligned with `reward_sums`.
    pub observation_counts: Vec<Vec<u32>>,
    pub invariant_checks: u64,
}

/// The elimination engine. See the module docs for the four-step round
/// structure; [`ElimNs::advance_round`] runs a whole round, and the
/// individual step methods are public so baselines and tests can drive a
/// subset (e.g. elimination without exploration or restarts).
#[derive(Debug, Clone)]
pub struct ElimNs {
    config: AlgorithmConfig,
    /// Cached `L`.
    log_term: f64,
    /// The round about to be played (1-based); `horizon + 1` when finished.
    next_round: usize,
    /// Epoch index `ℓ ≥ 1`; incremented by restarts, never reset.
    epoch: usize,
    /// First round `τ` of the current epoch.
    epoch_start: usize,
    /// Lowest non-eliminated arm.
    a_min: Arm,
    /// Elimination records of the current epoch, in creation order; their
    /// arms are exactly `1..a_min`.
    records: Vec<EliminationRecord>,
    /// Active and pending exploration phases of the current epoch.
    phases: Vec<ExplorationPhase>,
    reward_sums: Vec<Vec<f64>>,
    observation_counts: Vec<Vec<u32>>,
    /// Number of per-phase observation-invariant assertions exercised.
    invariant_checks: u64,
}

impl ElimNs {
    pub fn new(config: AlgorithmConfig) -> Result<Self> {
        config.validate()?;
        let k = config.num_arms;
        let log_term = config.log_term();
        Ok(ElimNs {
            config,
            log_term,
            next_round: 1,
            epoch: 1,
            epoch_start: 1,
            a_min: Arm::FIRST,
            records: Vec::new(),
            phases: Vec::new(),
            reward_sums: vec![vec![0.0]; k],
            observation_counts: vec![vec![0]; k],
            invariant_checks: 0,
        })
    }

    pub fn config(&self) -> &AlgorithmConfig {
        &self.config
    }

    pub fn log_term(&self) -> f64 {
        self.log_term
    }

    /// The round about to be played.
    pub fn next_round(&self) -> usize {
        self.next_round
    }

    pub fn is_finished(&self) -> bool {
        self.next_round > self.config.horizon
    }

    pub fn epoch(&self) -> usize {
        self.epoch
    }

    pub fn epoch_start(&self) -> usize {
        self.epoch_start
    }

    pub fn a_min(&self) -> Arm {
        self.a_min
    }

    pub fn records(&self) -> &[EliminationRecord] {
        &self.records
    }

    pub fn phases(&self) -> &[ExplorationPhase] {
        &self.phases
    }

    /// How many per-phase observation-invariant assertions have run.
    pub fn invariant_checks(&self) -> u64 {
        self.invariant_checks
    }

    // -- step 1 --------------------------------------------------------------

    /// Maybe insert replay phases starting at the current round. With no
    /// records there is nothing to re-examine and nothing is sampled.
    /// Otherwise, with `Δ_min` the smallest recorded gap, each dyadic scale
    /// `d_i = 2^{-i}` with `8·d_i ≥ Δ_min` independently inserts the phase
    /// `[t, t + ⌈C2·L/d_i²⌉)` with probability `d_i·√((ℓ+1)/T)`. One uniform
    /// draw is consumed per eligible scale, in increasing `i` order.
    ///
    /// # Panics
    /// Panics if the run is finished.
    pub fn sample_exploration_phases<R: Rng + ?Sized>(
        &mut self,
        rng: &mut R,
    ) -> Vec<ExplorationPhase> {
        assert!(!self.is_finished(), "sampling phases past the horizon");
        let t = self.next_round;
        let mut inserted = Vec::new();
        if self.records.is_empty() {
            return inserted;
        }
        let delta_min = self
            .records
            .iter()
            .map(|r| r.gap)
            .fold(f64::INFINITY, f64::min);
        let mut exponent = 0u32;
        while 8.0 * dyadic_scale(exponent) >= delta_min {
            let p = self.config.insertion_probability(self.epoch, exponent);
            if rng.random::<f64>() < p {
                let len = self.config.phase_length(exponent);
                // A degenerate log term (L = 0) yields zero-length phases,
                // which cover nothing and are never inserted.
                if len > 0 {
                    let phase = ExplorationPhase {
                        exponent,
                        start: t,
                        end_exclusive: t.saturating_add(len),
                    };
                    self.phases.push(phase);
                    inserted.push(phase);
                }
            }
            exponent += 1;
        }
        inserted
    }

    // -- step 2 --------------------------------------------------------------

    /// Decide the arm for the current round. Outside exploration this is the
    /// frontier `a_min`. When phases cover the round, `d_max` is their
    /// largest scale and the engine replays the lowest eliminated arm whose
    /// record gap is `≤ 8·d_max`.
    ///
    /// Also asserts, per covering phase, the observation invariant: the
    /// played arm is at or below every arm that phase needs observed.
    ///
    /// # Panics
    /// Panics if the run is finished, or on the internal defect of a covering
    /// phase with no qualifying record (impossible by construction: phases
    /// are only inserted at scales with `8·d ≥ Δ_min`, and records are never
    /// removed within an epoch).
    pub fn choose_action(&mut self) -> RoundDecision {
        assert!(!self.is_finished(), "choosing an action past the horizon");
        let t = self.next_round;
        let covering: Vec<f64> = self
            .phases
            .iter()
            .filter(|p| p.covers(t))
            .map(|p| p.scale())
            .collect();
        let d_max = covering.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let decision = if covering.is_empty() {
            RoundDecision {
                round: t,
                arm: self.a_min,
                in_exploration: false,
                d_max: None,
            }
        } else {
            let arm = self.replay_target(d_max).unwrap_or_else(|| {
                panic!("defect: a phase covers round {t} but no record gap is ≤ 8·d_max")
            });
            RoundDecision {
                round: t,
                arm,
                in_exploration: true,
                d_max: Some(d_max),
            }
        };
        // Observation invariant, checked per covering phase: every arm the
        // phase's eventual drift test will query is at or above the arm
        // played at every covered round.
        for d in covering {
            self.invariant_checks += 1;
            let required = self.replay_target(d).unwrap_or_else(|| {
                panic!("defect: phase at scale {d} covers round {t} with no qualifying record")
            });
            assert!(
                decision.arm <= required,
                "defect: round {t} plays arm {} but a phase at scale {d} requires arm ≤ {}",
                decision.arm,
                required
            );
        }
        decision
    }

    /// Lowest eliminated arm whose record gap is `≤ 8·d`.
    fn replay_target(&self, d: f64) -> Option<Arm> {
        self.records
            .iter()
            .filter(|r| r.gap <= 8.0 * d)
            .map(|r| r.arm)
            .min()
    }

    // -- step 3 --------------------------------------------------------------

    /// Ingest the rewards observed for the current round and advance the
    /// round counter. The suffix must reach the top arm and must start at or
    /// below the frontier (every legitimate play does), keeping the epoch's
    /// prefix tables complete for all non-eliminated arms.
    pub fn record_observations(&mut self, round: usize, suffix: &RewardSuffix) -> Result<()> {
        if self.is_finished() {
            return Err(Error::RunFinished);
        }
        if round != self.next_round {
            return Err(Error::RoundOutOfOrder {
                expected: self.next_round,
                found: round,
            });
        }
        if suffix.last().get() != self.config.num_arms {
            return Err(Error::IncompleteSuffix {
                expected: self.config.num_arms,
                found: suffix.last().get(),
            });
        }
        if suffix.first() > self.a_min {
            return Err(Error::SuffixMismatch {
                expected: self.a_min.get(),
                found: suffix.first().get(),
            });
        }
        // Phases that ended at or before this round cover nothing anymore and
        // already ran their drift test; drop them.
        self.phases.retain(|p| p.end_exclusive > round);
        let first = suffix.first().get();
        for idx in 0..self.config.num_arms {
            let arm = idx + 1;
            let (last_sum, last_count) = (
                *self.reward_sums[idx]
                    .last()
                    .expect("prefix row is never empty"),
                *self.observation_counts[idx]
                    .last()
                    .expect("prefix row is never empty"),
            );
            if arm >= first {
                let value = suffix.values()[arm - first];
                self.reward_sums[idx].push(last_sum + value);
                self.observation_counts[idx].push(last_count + 1);
            } else {
                self.reward_sums[idx].push(last_sum);
                self.observation_counts[idx].push(last_count);
            }
        }
        self.next_round += 1;
        Ok(())
    }

    /// Mean reward of `arm` over rounds `[start, end)` of the current epoch,
    /// from prefix sums in constant time. The window must lie inside the
    /// epoch's recorded rounds and the arm must be observed at every round of
    /// it.
    pub fn empirical_mean(&self, arm: Arm, start: usize, end: usize) -> Result<f64> {
        if arm.get() > self.config.num_arms {
            return Err(Error::ArmOutOfRange {
                arm: arm.get(),
                num_arms: self.config.num_arms,
            });
        }
        if start < self.epoch_start || start >= end || end > self.next_round {
            return Err(Error::BadWindow { start, end });
        }
        self.mean_in(arm.index0(), start, end)
            .ok_or(Error::MissingObservations {
                arm: arm.get(),
                start,
                end,
            })
    }

    fn mean_in(&self, arm_idx: usize, start: usize, end: usize) -> Option<f64> {
        let lo = start - self.epoch_start;
        let hi = end - self.epoch_start;
        let observed = self.observation_counts[arm_idx][hi] - self.observation_counts[arm_idx][lo];
        if observed as usize != end - start {
            return None;
        }
        let sum = self.reward_sums[arm_idx][hi] - self.reward_sums[arm_idx][lo];
        Some(sum / (end - start) as f64)
    }

    /// Like [`Self::mean_in`] but for windows the engine's own invariants
    /// guarantee are fully observed.
    fn mean_required(&self, arm_idx: usize, start: usize, end: usize) -> f64 {
        self.mean_in(arm_idx, start, end).unwrap_or_else(|| {
            panic!(
                "defect: arm {} missing observations in [{start}, {end}) — \
                 observation completeness violated",
                arm_idx + 1
            )
        })
    }

    /// Window starts scanned by the elimination step, ascending.
    fn scan_starts(&self) -> Vec<usize> {
        let end = self.next_round; // window end (exclusive) after recording
        match self.config.sigma_scan_mode {
            SigmaScanMode::Exact => (self.epoch_start..end).collect(),
            SigmaScanMode::Geometric => {
                let mut starts = vec![self.epoch_start];
                let mut j = 0u32;
                loop {
                    let len = 1usize << j;
                    if len >= end - self.epoch_start {
                        break;
                    }
                    starts.push(end - len);
                    j += 1;
                }
                starts.sort_unstable();
                starts.dedup();
                starts
            }
        }
    }

    /// Advance the frontier while some scanned window shows an arm beating it
    /// by more than `√(C1·L/window length)`. Each elimination freezes a
    /// record whose gap is the largest window gap found and whose snapshot
    /// holds that window's means for every arm from the frontier upward.
    /// Returns the records created, in order. Idempotent once it returns
    /// empty.
    pub fn elimination_step(&mut self) -> Vec<EliminationRecord> {
        let mut created = Vec::new();
        if self.next_round == self.epoch_start {
            return created; // no rounds recorded in this epoch yet
        }
        let end = self.next_round;
        let starts = self.scan_starts();
        while self.a_min.get() < self.config.num_arms {
            // Best (gap, σ) over the scan grid: largest gap wins, ties go to
            // the earliest window start for a deterministic replay.
            let mut witness: Option<(f64, usize)> = None;
            for &sigma in &starts {
                let len = (end - sigma) as f64;
                let threshold = (self.config.c1 * self.log_term / len).sqrt();
                let frontier_mean = self.mean_required(self.a_min.index0(), sigma, end);
                let mut best_diff = f64::NEG_INFINITY;
                for idx in self.a_min.get()..self.config.num_arms {
                    let diff = self.mean_required(idx, sigma, end) - frontier_mean;
                    if diff > best_diff {
                        best_diff = diff;
                    }
                }
                if best_diff > threshold && witness.is_none_or(|(g, _)| best_diff > g) {
                    witness = Some((best_diff, sigma));
                }
            }
            let Some((gap, sigma)) = witness else { break };
            debug_assert!(
                gap > (self.config.c1 * self.log_term / self.config.horizon as f64).sqrt(),
                "recorded gap at or below the minimum elimination threshold"
            );
            let snapshot: Vec<f64> = (self.a_min.index0()..self.config.num_arms)
                .map(|idx| self.mean_required(idx, sigma, end))
                .collect();
            let record = EliminationRecord {
                gap,
                arm: self.a_min,
                snapshot,
            };
            self.records.push(record.clone());
            created.push(record);
            self.a_min = self.a_min.next();
            debug_assert_eq!(self.a_min.get(), 1 + self.records.len());
        }
        created
    }

    // -- step 4 --------------------------------------------------------------

    /// Drift test for phases completing at the current boundary: for each
    /// phase `(d, [t′, t+1))` ending exactly now, each record with gap
    /// `≤ 8d`, and each arm at or above the record's, compare the phase
    /// window mean against the frozen snapshot. A deviation beyond `θ·d`
    /// restarts the engine: new epoch, frontier and tables reset. Idempotent
    /// (a restart clears the phase set).
    pub fn nonstationarity_check(&mut self) -> UpdateEvents {
        let boundary = self.next_round; // t+1 after recording round t
        let theta = self.config.restart_threshold;
        let mut violated = false;
        'scan: for phase in self.phases.iter().filter(|p| p.end_exclusive == boundary) {
            let d = phase.scale();
            for record in self.records.iter().filter(|r| r.gap <= 8.0 * d) {
                for (arm, frozen) in record.snapshot_iter() {
                    let fresh = self.mean_required(arm.index0(), phase.start, boundary);
                    if (fresh - frozen).abs() > theta * d {
                        violated = true;
                        break 'scan;
                    }
                }
            }
        }
        if violated {
            self.restart(boundary);
            UpdateEvents {
                eliminations: Vec::new(),
                restarted: true,
                new_epoch_start: Some(boundary),
            }
        } else {
            UpdateEvents::default()
        }
    }

    /// Unconditional restart before the next round is played; used by the
    /// oracle baseline that is told the true change points.
    pub fn force_restart(&mut self) {
        let start = self.next_round;
        self.restart(start);
    }

    fn restart(&mut self, new_start: usize) {
        let k = self.config.num_arms;
        self.epoch += 1;
        self.epoch_start = new_start;
        self.a_min = Arm::FIRST;
        self.records.clear();
        self.phases.clear();
        self.reward_sums = vec![vec![0.0]; k];
        self.observation_counts = vec![vec![0]; k];
    }

    // -- full round ----------------------------------------------------------

    /// Run one complete round: sample phases, decide the arm, fetch the
    /// observed suffix from `feedback` (which must start exactly at the
    /// decided arm and reach the top arm), ingest it, eliminate, and run the
    /// drift test.
    pub fn advance_round<R, F>(
        &mut self,
        rng: &mut R,
        feedback: F,
    ) -> Result<(RoundDecision, UpdateEvents)>
    where
        R: Rng + ?Sized,
        F: FnOnce(&RoundDecision) -> RewardSuffix,
    {
        if self.is_finished() {
            return Err(Error::RunFinished);
        }
        self.sample_exploration_phases(rng);
        let decision = self.choose_action();
        let suffix = feedback(&decision);
        if suffix.first() != decision.arm {
            return Err(Error::SuffixMismatch {
                expected: decision.arm.get(),
                found: suffix.first().get(),
            });
        }
        self.record_observations(decision.round, &suffix)?;
        let eliminations = self.elimination_step();
        let mut events = self.nonstationarity_check();
        events.eliminations = eliminations;
        Ok((decision, events))
    }

    // -- checkpointing ---------------------------------------------------------

    pub fn snapshot(&self) -> EpochSnapshot {
        EpochSnapshot {
            epoch: self.epoch,
            epoch_start: self.epoch_start,
            next_round: self.next_round,
            a_min: self.a_min,
            records: self.records.clone(),
            phases: self.phases.clone(),
            reward_sums: self.reward_sums.clone(),
            observation_counts: self.observation_counts.clone(),
            invariant_checks: self.invariant_checks,
        }
    }

    /// Rebuild an engine from a snapshot, revalidating its structure.
    pub fn restore(config: AlgorithmConfig, snapshot: EpochSnapshot) -> Result<Self> {
        config.validate()?;
        let k = config.num_arms;
        let fail = |reason: String| Err(Error::InvalidSnapshot(reason));
        if snapshot.epoch == 0 || snapshot.epoch_start == 0 {
            return fail("epoch and epoch_start are 1-based".into());
        }
        if snapshot.next_round < snapshot.epoch_start || snapshot.next_round > config.horizon + 1 {
            return fail(format!(
                "next_round {} outside [epoch_start, horizon+1]",
                snapshot.next_round
            ));
        }
        if snapshot.a_min.get() > k {
            return fail(format!("a_min {} exceeds num_arms {k}", snapshot.a_min));
        }
        if snapshot.records.len() != snapshot.a_min.index0() {
            return fail(format!(
                "{} records but frontier at arm {}",
                snapshot.records.len(),
                snapshot.a_min
            ));
        }
        for (j, record) in snapshot.records.iter().enumerate() {
            if record.arm.get() != j + 1 {
                return fail(format!(
                    "record {j} eliminates arm {}, expected arm {}",
                    record.arm,
                    j + 1
                ));
            }
            // Revalidate the construction invariants.
            EliminationRecord::new(record.arm, record.gap, record.snapshot.clone())?;
            if record.snapshot.len() != k - record.arm.index0() {
                return fail(format!(
                    "record for arm {} has snapshot of {} means, expected {}",
                    record.arm,
                    record.snapshot.len(),
                    k - record.arm.index0()
                ));
            }
        }
        for phase in &snapshot.phases {
            if phase.start < snapshot.epoch_start || phase.end_exclusive <= phase.start {
                return fail(format!(
                    "phase [{}, {}) outside the epoch",
                    phase.start, phase.end_exclusive
                ));
            }
        }
        let rows = snapshot.next_round - snapshot.epoch_start + 1;
        if snapshot.reward_sums.len() != k || snapshot.observation_counts.len() != k {
            return fail("prefix tables must have one row per arm".into());
        }
        for idx in 0..k {
            let sums = &snapshot.reward_sums[idx];
            let counts = &snapshot.observation_counts[idx];
            if sums.len() != rows || counts.len() != rows {
                return fail(format!(
                    "arm {} prefix rows have {} entries, expected {rows}",
                    idx + 1,
                    sums.len()
                ));
            }
            if sums[0] != 0.0 || counts[0] != 0 {
                return fail("prefix rows must start at zero".into());
            }
            for j in 1..rows {
                let dc = counts[j].wrapping_sub(counts[j - 1]);
                let ds = sums[j] - sums[j - 1];
                let consistent = match dc {
                    0 => ds == 0.0,
                    1 => (0.0..=1.0).contains(&ds),
                    _ => false,
                };
                if !consistent {
                    return fail(format!(
                        "arm {} prefix step {j} is not a single observation in [0, 1]",
                        idx + 1
                    ));
                }
            }
        }
        let log_term = config.log_term();
        Ok(ElimNs {
            config,
            log_term,
            next_round: snapshot.next_round,
            epoch: snapshot.epoch,
            epoch_start: snapshot.epoch_start,
            a_min: snapshot.a_min,
            records: snapshot.records,
            phases: snapshot.phases,
            reward_sums: snapshot.reward_sums,
            observation_counts: snapshot.observation_counts,
            invariant_checks: snapshot.invariant_checks,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{RngCore, SeedableRng};
    use rand_chacha::ChaCha12Rng;

    /// Replays a fixed list of raw 64-bit words; panics when exhausted, which
    /// doubles as an assertion that no extra draws are consumed.
    struct SeqRng {
        words: Vec<u64>,
        next: usize,
    }

    impl SeqRng {
        fn new(words: Vec<u64>) -> Self {
            SeqRng { words, next: 0 }
        }

        /// A word that makes `random::<f64>()` return 0.0 (always insert).
        const LOW: u64 = 0;
    }

    impl RngCore for SeqRng {
        fn next_u32(&mut self) -> u32 {
            self.next_u64() as u32
        }
        fn next_u64(&mut self) -> u64 {
            let word = self.words[self.next];
            self.next += 1;
            word
        }
        fn fill_bytes(&mut self, dest: &mut [u8]) {
            for chunk in dest.chunks_mut(8) {
                let bytes = self.next_u64().to_le_bytes();
                chunk.copy_from_slice(&bytes[..chunk.len()]);
            }
        }
    }

    fn full_suffix(values: &[f64]) -> RewardSuffix {
        RewardSuffix::new(Arm::FIRST, values.to_vec()).unwrap()
    }

    /// Feed one round of full-information deterministic rewards and run the
    /// elimination step.
    fn feed_and_eliminate(engine: &mut ElimNs, values: &[f64]) -> Vec<EliminationRecord> {
        let round = engine.next_round();
        engine
            .record_observations(round, &full_suffix(values))
            .unwrap();
        engine.elimination_step()
    }

    /// A snapshot with complete observations (every arm observed every round)
    /// whose per-arm means are constant at `means`.
    fn snapshot_with_constant_means(
        config: &AlgorithmConfig,
        records: Vec<EliminationRecord>,
        phases: Vec<ExplorationPhase>,
        means: &[f64],
        recorded_rounds: usize,
    ) -> EpochSnapshot {
        let a_min = Arm::new(records.len() + 1).unwrap();
        EpochSnapshot {
            epoch: 1,
            epoch_start: 1,
            next_round: recorded_rounds + 1,
            a_min,
            records,
            phases,
            reward_sums: means
                .iter()
                .map(|&m| (0..=recorded_rounds).map(|j| m * j as f64).collect())
                .collect(),
            observation_counts: (0..config.num_arms)
                .map(|_| (0..=recorded_rounds as u32).collect())
                .collect(),
            invariant_checks: 0,
        }
    }

    #[test]
    fn fresh_state_matches_initialization_contract() {
        let engine = ElimNs::new(AlgorithmConfig::demo(100, 3)).unwrap();
        assert_eq!(engine.epoch(), 1);
        assert_eq!(engine.epoch_start(), 1);
        assert_eq!(engine.next_round(), 1);
        assert_eq!(engine.a_min(), Arm::FIRST);
        assert!(engine.records().is_empty());
        assert!(engine.phases().is_empty());
    }

    #[test]
    fn degenerate_single_round_single_arm_is_legal() {
        let engine = ElimNs::new(AlgorithmConfig::demo(1, 1)).unwrap();
        assert!(!engine.is_finished());
    }

    #[test]
    fn invalid_configs_are_rejected() {
        let mut config = AlgorithmConfig::demo(100, 3);
        config.c1 = 0.0;
        assert!(matches!(
            ElimNs::new(config).unwrap_err(),
            Error::InvalidAlgorithmConfig(_)
        ));
        let mut config = AlgorithmConfig::demo(100, 3);
        config.restart_threshold = 1.0;
        assert!(config.validate().is_err());
        let mut config = AlgorithmConfig::demo(0, 3);
        config.horizon = 0;
        assert!(config.validate().is_err());
        // Small constants are rejected only under enforcement.
        let mut config = AlgorithmConfig::demo(100, 3);
        config.enforce_calibrated_constants = true;
        assert!(config.validate().is_err());
        assert!(AlgorithmConfig::calibrated_switching(100, 3)
            .validate()
            .is_ok());
        assert!(AlgorithmConfig::calibrated_dynamic(100, 3)
            .validate()
            .is_ok());
    }

    #[test]
    fn eligible_scales_stop_where_eight_d_drops_below_smallest_gap() {
        // Gaps 0.5 and 0.05: Δ_min = 0.05, and 8·2⁻⁷ = 0.0625 ≥ 0.05 > 8·2⁻⁸,
        // so scales i = 0..=7 are eligible — exactly eight insertion draws.
        let config = AlgorithmConfig::demo(10_000, 3);
        let records = vec![
            EliminationRecord::new(Arm::new(1).unwrap(), 0.5, vec![0.1, 0.6, 0.6]).unwrap(),
            EliminationRecord::new(Arm::new(2).unwrap(), 0.05, vec![0.55, 0.6]).unwrap(),
        ];
        let snapshot =
            snapshot_with_constant_means(&config, records, Vec::new(), &[0.1, 0.55, 0.6], 10);
        let mut engine = ElimNs::restore(config.clone(), snapshot).unwrap();

        let mut rng = SeqRng::new(vec![SeqRng::LOW; 8]);
        let inserted = engine.sample_exploration_phases(&mut rng);
        assert_eq!(rng.next, 8, "one draw per eligible scale");
        assert_eq!(inserted.len(), 8);
        for (i, phase) in inserted.iter().enumerate() {
            assert_eq!(phase.exponent, i as u32);
            assert_eq!(phase.start, engine.next_round());
            assert_eq!(
                phase.end_exclusive - phase.start,
                config.phase_length(i as u32)
            );
        }
    }

    #[test]
    fn insertion_probability_and_phase_length_match_hand_values() {
        let demo = AlgorithmConfig::demo(10_000, 3);
        // d = 1/4 in epoch 3 over 10⁴ rounds: 0.25·√(4/10⁴) = 0.005.
        assert!((demo.insertion_probability(3, 2) - 0.005).abs() < 1e-12);

        // Calibrated log factor over 100 arms and 10⁴ rounds: L = ln(10¹⁴),
        // and ⌈32·L/0.0625⌉ = ⌈16504.93…⌉ = 16505.
        let calibrated = AlgorithmConfig::calibrated_switching(10_000, 100);
        assert_eq!(calibrated.phase_length(2), 16_505);
    }

    #[test]
    fn no_records_means_no_phases_and_no_draws() {
        let mut engine = ElimNs::new(AlgorithmConfig::demo(100, 3)).unwrap();
        // SeqRng panics on any draw; an empty word list proves none happen.
        let mut rng = SeqRng::new(Vec::new());
        assert!(engine.sample_exploration_phases(&mut rng).is_empty());
    }

    #[test]
    fn zero_log_term_skips_zero_length_phases() {
        // T = 1 in demo mode gives L = ln 1 = 0, hence zero-length phases.
        let config = AlgorithmConfig::demo(1, 2);
        let records =
            vec![EliminationRecord::new(Arm::new(1).unwrap(), 0.5, vec![0.1, 0.6]).unwrap()];
        let snapshot = snapshot_with_constant_means(&config, records, Vec::new(), &[0.1, 0.6], 0);
        let mut engine = ElimNs::restore(config, snapshot).unwrap();
        // Gap 0.5 keeps scales i = 0..=4 eligible (8·2⁻⁴ = 0.5): five draws.
        let mut rng = SeqRng::new(vec![SeqRng::LOW; 5]);
        assert!(engine.sample_exploration_phases(&mut rng).is_empty());
        assert_eq!(rng.next, 5, "draws still consumed per eligible scale");
    }

    #[test]
    fn replay_targets_the_lowest_arm_whose_gap_fits_the_active_scale() {
        // Records (g=0.5, arm 1) and (g=0.05, arm 2).
        let config = AlgorithmConfig::demo(10_000, 3);
        let records = vec![
            EliminationRecord::new(Arm::new(1).unwrap(), 0.5, vec![0.1, 0.6, 0.6]).unwrap(),
            EliminationRecord::new(Arm::new(2).unwrap(), 0.05, vec![0.55, 0.6]).unwrap(),
        ];

        // d_max = 2⁻⁵: 0.05 ≤ 0.25 qualifies but 0.5 > 0.25 does not → arm 2.
        let phase = ExplorationPhase {
            exponent: 5,
            start: 11,
            end_exclusive: 12,
        };
        let snapshot = snapshot_with_constant_means(
            &config,
            records.clone(),
            vec![phase],
            &[0.1, 0.55, 0.6],
            10,
        );
        let mut engine = ElimNs::restore(config.clone(), snapshot).unwrap();
        let decision = engine.choose_action();
        assert!(decision.in_exploration);
        assert_eq!(decision.arm.get(), 2);
        assert_eq!(decision.d_max, Some(0.03125));
        assert!(engine.invariant_checks() > 0);

        // d_max = 1/2: both records qualify (0.5 ≤ 4) → arm 1.
        let phase = ExplorationPhase {
            exponent: 1,
            start: 11,
            end_exclusive: 12,
        };
        let snapshot =
            snapshot_with_constant_means(&config, records, vec![phase], &[0.1, 0.55, 0.6], 10);
        let mut engine = ElimNs::restore(config, snapshot).unwrap();
        let decision = engine.choose_action();
        assert_eq!(decision.arm.get(), 1);
        assert_eq!(decision.d_max, Some(0.5));
    }

    #[test]
    fn without_covering_phases_the_frontier_is_played() {
        let config = AlgorithmConfig::demo(1_000, 5);
        let records = (1..=3)
            .map(|a| {
                EliminationRecord::new(Arm::new(a).unwrap(), 0.5, vec![0.1; 5 - (a - 1)]).unwrap()
            })
            .collect();
        let snapshot = snapshot_with_constant_means(&config, records, Vec::new(), &[0.1; 5], 10);
        let mut engine = ElimNs::restore(config, snapshot).unwrap();
        let decision = engine.choose_action();
        assert_eq!(decision.arm.get(), 4);
        assert!(!decision.in_exploration);
        assert_eq!(decision.d_max, None);
    }

    #[test]
    fn observations_extend_only_the_suffix_arms() {
        let mut engine = ElimNs::new(AlgorithmConfig::demo(100, 3)).unwrap();
        engine
            .record_observations(1, &full_suffix(&[0.5, 0.5, 0.5]))
            .unwrap();
        // Arm 2 suffix: arms 2 and 3 gain an observation, arm 1 does not.
        // (Playing arm 2 is legitimate here only because a_min = 1 forbids it;
        // use a fresh frontier-1 engine and check counts via empirical_mean.)
        let suffix = RewardSuffix::new(Arm::new(2).unwrap(), vec![0.4, 0.9]).unwrap();
        assert!(matches!(
            engine.record_observations(2, &suffix),
            Err(Error::SuffixMismatch { .. })
        ));
        // After one elimination the frontier is above arm 2 and the suffix is
        // accepted; exercised in the elimination tests. Here check the
        // remaining error paths.
        let wrong_round = engine.record_observations(5, &full_suffix(&[0.1, 0.1, 0.1]));
        assert!(matches!(
            wrong_round,
            Err(Error::RoundOutOfOrder {
                expected: 2,
                found: 5
            })
        ));
        let short = RewardSuffix::new(Arm::FIRST, vec![0.1, 0.1]).unwrap();
        assert!(matches!(
            engine.record_observations(2, &short),
            Err(Error::IncompleteSuffix {
                expected: 3,
                found: 2
            })
        ));
        assert!(matches!(
            RewardSuffix::new(Arm::FIRST, vec![0.1, 1.3]),
            Err(Error::RewardOutOfRange { .. })
        ));
    }

    #[test]
    fn empirical_mean_matches_hand_values_and_validates_windows() {
        let mut engine = ElimNs::new(AlgorithmConfig::demo(100, 1)).unwrap();
        for value in [0.9, 0.9, 0.9, 0.9, 0.2, 0.4, 0.6] {
            let round = engine.next_round();
            engine
                .record_observations(round, &full_suffix(&[value]))
                .unwrap();
        }
        let arm = Arm::FIRST;
        // Rewards 0.2, 0.4, 0.6 at rounds 5, 6, 7.
        assert!((engine.empirical_mean(arm, 5, 8).unwrap() - 0.4).abs() < 1e-12);
        assert!((engine.empirical_mean(arm, 5, 6).unwrap() - 0.2).abs() < 1e-12);
        assert!(matches!(
            engine.empirical_mean(arm, 5, 5),
            Err(Error::BadWindow { .. })
        ));
        assert!(matches!(
            engine.empirical_mean(arm, 5, 9),
            Err(Error::BadWindow { .. })
        ));
        assert!(matches!(
            engine.empirical_mean(Arm::new(2).unwrap(), 5, 6),
            Err(Error::ArmOutOfRange { .. })
        ));
    }

    #[test]
    fn empirical_mean_equals_brute_force_on_a_random_trace() {
        let mut engine = ElimNs::new(AlgorithmConfig::demo(64, 4)).unwrap();
        let mut rng = ChaCha12Rng::seed_from_u64(7);
        let mut rewards: Vec<[f64; 4]> = Vec::new();
        for _ in 0..64 {
            let row = [
                rng.random::<f64>(),
                rng.random::<f64>(),
                rng.random::<f64>(),
                rng.random::<f64>(),
            ];
            let round = engine.next_round();
            engine
                .record_observations(round, &full_suffix(&row))
                .unwrap();
            rewards.push(row);
        }
        for start in 1..=64 {
            for end in (start + 1)..=65 {
                for arm in 1..=4 {
                    let direct: f64 = (start..end).map(|t| rewards[t - 1][arm - 1]).sum::<f64>()
                        / (end - start) as f64;
                    let fast = engine
                        .empirical_mean(Arm::new(arm).unwrap(), start, end)
                        .unwrap();
                    assert!(
                        (fast - direct).abs() < 1e-12,
                        "window [{start}, {end}) arm {arm}: {fast} vs {direct}"
                    );
                }
            }
        }
    }

    #[test]
    fn missing_observations_in_a_window_are_reported() {
        let mut engine = ElimNs::new(AlgorithmConfig::demo(100, 2)).unwrap();
        engine
            .record_observations(1, &full_suffix(&[0.9, 0.1]))
            .unwrap();
        let elimination_round = {
            // Force arm 2 to lag: big gap eliminates arm 2? No — the frontier
            // is arm 1 and arm 2 is worse, so nothing is eliminated and the
            // frontier stays at 1; a suffix starting at arm 2 is invalid.
            // Instead eliminate arm 1 by making arm 2 dominant.
            let mut engine = ElimNs::new(AlgorithmConfig::demo(100, 2)).unwrap();
            let mut created = Vec::new();
            while created.is_empty() {
                created = feed_and_eliminate(&mut engine, &[0.05, 0.95]);
            }
            let fired_at = engine.next_round() - 1;
            // Now play arm 2 (the frontier) and leave arm 1 unobserved.
            let suffix = RewardSuffix::new(Arm::new(2).unwrap(), vec![0.95]).unwrap();
            let round = engine.next_round();
            engine.record_observations(round, &suffix).unwrap();
            let gap_round = engine.next_round() - 1;
            assert!(matches!(
                engine.empirical_mean(Arm::FIRST, gap_round, gap_round + 1),
                Err(Error::MissingObservations { .. })
            ));
            fired_at
        };
        assert!(elimination_round >= 2);
    }

    #[test]
    fn elimination_fires_at_the_predicted_round_in_both_scan_modes() {
        // Deterministic two-arm trace with means 0.3 / 0.7 under C1 = 4 and
        // L = ln 20000: the gap 0.4 first exceeds √(4·L/n) at window length
        // n = 248.
        for mode in [SigmaScanMode::Exact, SigmaScanMode::Geometric] {
            let mut config = AlgorithmConfig::demo(20_000, 2);
            config.sigma_scan_mode = mode;
            let mut engine = ElimNs::new(config).unwrap();
            let mut fired_at = None;
            for round in 1..=300 {
                let created = feed_and_eliminate(&mut engine, &[0.3, 0.7]);
                if !created.is_empty() {
                    assert_eq!(created.len(), 1);
                    assert_eq!(created[0].arm, Arm::FIRST);
                    assert!((created[0].gap - 0.4).abs() < 1e-9);
                    assert!((created[0].snapshot_mean(Arm::FIRST).unwrap() - 0.3).abs() < 1e-9);
                    fired_at = Some(round);
                    break;
                }
            }
            assert_eq!(fired_at, Some(248), "mode {mode:?}");
        }
    }

    #[test]
    fn geometric_scan_fires_within_twice_the_exact_window() {
        // The arms agree for 300 rounds, then arm 2 jumps. The exact scan
        // fires at round 548 with the pure window [301, 549) of length 248
        // (gap 0.4 > √(4L/248) ≈ 0.3997). The geometric scan fires at round
        // 552 with the straddling power-of-two window [297, 553) of length
        // 256 holding 252 changed rounds: diluted gap 0.4·252/256 = 0.39375
        // just beats √(4L/256) ≈ 0.39337. Its window length 256 is within
        // the promised factor 2 of the exact scan's 248.
        let fire_round = |mode: SigmaScanMode| {
            let mut config = AlgorithmConfig::demo(20_000, 2);
            config.sigma_scan_mode = mode;
            let mut engine = ElimNs::new(config).unwrap();
            for round in 1..=1_000 {
                let arm2 = if round <= 300 { 0.3 } else { 0.7 };
                if !feed_and_eliminate(&mut engine, &[0.3, arm2]).is_empty() {
                    return round;
                }
            }
            panic!("no elimination within 1000 rounds");
        };
        let exact = fire_round(SigmaScanMode::Exact);
        let geometric = fire_round(SigmaScanMode::Geometric);
        assert_eq!(exact, 548);
        assert_eq!(geometric, 552);
        // Detection lag behind the change at round 300 stays within factor 2.
        assert!(geometric - 300 <= 2 * (exact - 300));
    }

    #[test]
    fn identical_arms_are_never_eliminated() {
        let mut engine = ElimNs::new(AlgorithmConfig::demo(500, 3)).unwrap();
        for _ in 0..500 {
            assert!(feed_and_eliminate(&mut engine, &[0.4, 0.4, 0.4]).is_empty());
        }
        assert_eq!(engine.a_min(), Arm::FIRST);
    }

    #[test]
    fn dominant_top_arm_eliminates_in_index_order() {
        // Means (0.1, 0.55, 0.95), C1 = 1, T = 200 (L = ln 200): arm 1 falls
        // at n = 8 with gap 0.85, arm 2 at n = 34 with gap 0.4.
        let mut config = AlgorithmConfig::demo(200, 3);
        config.c1 = 1.0;
        config.sigma_scan_mode = SigmaScanMode::Exact;
        let mut engine = ElimNs::new(config).unwrap();
        let mut fired: Vec<(usize, Arm, f64)> = Vec::new();
        for round in 1..=200 {
            for record in feed_and_eliminate(&mut engine, &[0.1, 0.55, 0.95]) {
                fired.push((round, record.arm, record.gap));
            }
        }
        assert_eq!(engine.a_min().get(), 3);
        assert_eq!(engine.records().len(), 2);
        assert_eq!(fired.len(), 2);
        assert_eq!((fired[0].0, fired[0].1.get()), (8, 1));
        assert!((fired[0].2 - 0.85).abs() < 1e-9);
        assert_eq!((fired[1].0, fired[1].1.get()), (34, 2));
        assert!((fired[1].2 - 0.4).abs() < 1e-9);
    }

    #[test]
    fn drift_test_restarts_exactly_beyond_theta_d() {
        // Record (g = 0.4, arm 1, v[2] = 0.7); completed phase at d = 1/8
        // (0.4 ≤ 8d = 1). With θ = 1/4: a phase mean of 0.8 deviates by
        // 0.1 > 0.03125 → restart; 0.71 deviates by 0.01 → no restart.
        let run = |arm2_mean: f64| {
            let mut config = AlgorithmConfig::demo(1_000, 2);
            config.restart_threshold = 0.25;
            let record = EliminationRecord::new(Arm::FIRST, 0.4, vec![0.3, 0.7]).unwrap();
            let rounds = 40;
            let phase = ExplorationPhase {
                exponent: 3,
                start: 1,
                end_exclusive: rounds + 1,
            };
            let snapshot = snapshot_with_constant_means(
                &config,
                vec![record],
                vec![phase],
                &[0.3, arm2_mean],
                rounds,
            );
            let mut engine = ElimNs::restore(config, snapshot).unwrap();
            (engine.nonstationarity_check(), engine)
        };

        let (events, engine) = run(0.8);
        assert!(events.restarted);
        assert_eq!(events.new_epoch_start, Some(41));
        assert_eq!(engine.epoch(), 2);
        assert_eq!(engine.epoch_start(), 41);
        assert_eq!(engine.a_min(), Arm::FIRST);
        assert!(engine.records().is_empty());
        assert!(engine.phases().is_empty());

        let (events, engine) = run(0.71);
        assert!(!events.restarted);
        assert_eq!(engine.epoch(), 1);
        assert_eq!(engine.records().len(), 1);
    }

    #[test]
    fn no_phases_means_no_restart() {
        let config = AlgorithmConfig::demo(1_000, 2);
        let record = EliminationRecord::new(Arm::FIRST, 0.4, vec![0.3, 0.7]).unwrap();
        let snapshot =
            snapshot_with_constant_means(&config, vec![record], Vec::new(), &[0.0, 0.9], 40);
        let mut engine = ElimNs::restore(config, snapshot).unwrap();
        assert!(!engine.nonstationarity_check().restarted);
    }

    #[test]
    fn restart_resets_to_a_fresh_state_up_to_epoch_bookkeeping() {
        let mut engine = ElimNs::new(AlgorithmConfig::demo(20_000, 2)).unwrap();
        for _ in 0..400 {
            feed_and_eliminate(&mut engine, &[0.3, 0.7]);
        }
        assert!(!engine.records().is_empty());
        engine.force_restart();
        let fresh = ElimNs::new(AlgorithmConfig::demo(20_000, 2)).unwrap();
        let (snap, fresh_snap) = (engine.snapshot(), fresh.snapshot());
        assert_eq!(snap.epoch, 2);
        assert_eq!(snap.epoch_start, 401);
        assert_eq!(snap.next_round, 401);
        assert_eq!(snap.a_min, fresh_snap.a_min);
        assert_eq!(snap.records, fresh_snap.records);
        assert_eq!(snap.phases, fresh_snap.phases);
        assert_eq!(snap.reward_sums, fresh_snap.reward_sums);
        assert_eq!(snap.observation_counts, fresh_snap.observation_counts);
    }

    #[test]
    fn single_round_run_plays_arm_one_and_then_finishes() {
        let mut engine = ElimNs::new(AlgorithmConfig::demo(1, 3)).unwrap();
        let mut rng = ChaCha12Rng::seed_from_u64(0);
        let (decision, events) = engine
            .advance_round(&mut rng, |d| {
                assert_eq!(d.arm, Arm::FIRST);
                full_suffix(&[0.2, 0.5, 0.9])
            })
            .unwrap();
        assert_eq!(decision.arm, Arm::FIRST);
        assert!(!decision.in_exploration);
        // At T = 1 the demo log term ln T is 0, so every elimination
        // threshold is 0 and any positive gap expels the frontier at once.
        assert_eq!(events.eliminations.len(), 2);
        assert!((events.eliminations[0].gap - 0.7).abs() < 1e-12);
        assert_eq!(events.eliminations[0].arm, Arm::FIRST);
        assert!((events.eliminations[1].gap - 0.4).abs() < 1e-12);
        assert!(!events.restarted);
        assert!(engine.is_finished());
        assert!(matches!(
            engine.advance_round(&mut rng, |_| full_suffix(&[0.0, 0.0, 0.0])),
            Err(Error::RunFinished)
        ));
    }

    #[test]
    fn scripted_change_story_eliminates_then_restarts() {
        // Three deterministic arms at (0, 0.45, 0.5); arm 1 jumps to 1.0 at
        // round 17001. The engine eliminates arm 1 (gap 0.5) and then arm 2
        // (gap 0.05), and after the jump some completed replay phase sees arm
        // 1's new mean and restarts.
        let mut engine = ElimNs::new(AlgorithmConfig::demo(20_000, 3)).unwrap();
        let mut rng = ChaCha12Rng::seed_from_u64(11);
        let mut eliminated: Vec<usize> = Vec::new();
        let mut restart_round = None;
        for round in 1..=20_000 {
            let arm1 = if round <= 17_000 { 0.0 } else { 1.0 };
            let (_, events) = engine
                .advance_round(&mut rng, |d| {
                    let all = [arm1, 0.45, 0.5];
                    RewardSuffix::new(d.arm, all[d.arm.index0()..].to_vec()).unwrap()
                })
                .unwrap();
            eliminated.extend(events.eliminations.iter().map(|r| r.arm.get()));
            if events.restarted && restart_round.is_none() {
                restart_round = Some(round);
            }
            if restart_round.is_some() {
                break;
            }
        }
        assert!(
            eliminated.starts_with(&[1, 2]),
            "eliminations were {eliminated:?}"
        );
        let restart_round = restart_round.expect("a replay phase must catch the jump");
        assert!(restart_round > 17_000, "restarted at {restart_round}");
    }

    #[test]
    fn snapshot_roundtrips_through_json_and_resumes_identically() {
        let config = AlgorithmConfig::demo(2_000, 3);
        let mut engine = ElimNs::new(config.clone()).unwrap();
        let mut rng = ChaCha12Rng::seed_from_u64(42);
        let means = [0.2, 0.5, 0.8];
        let play = |engine: &mut ElimNs, rng: &mut ChaCha12Rng| {
            engine
                .advance_round(rng, |d| {
                    RewardSuffix::new(d.arm, means[d.arm.index0()..].to_vec()).unwrap()
                })
                .unwrap()
        };
        for _ in 0..500 {
            play(&mut engine, &mut rng);
        }
        let snapshot = engine.snapshot();
        let json = serde_json::to_string(&snapshot).unwrap();
        let decoded: EpochSnapshot = serde_json::from_str(&json).unwrap();
        assert_eq!(decoded, snapshot);

        let mut restored = ElimNs::restore(config, decoded).unwrap();
        // Identical forked RNG streams must replay identical futures.
        let mut rng_restored = rng.clone();
        for _ in 0..500 {
            let (d1, e1) = play(&mut engine, &mut rng);
            let (d2, e2) = play(&mut restored, &mut rng_restored);
            assert_eq!(d1, d2);
            assert_eq!(e1, e2);
        }
        assert_eq!(engine.snapshot(), restored.snapshot());
    }

    #[test]
    fn restore_rejects_inconsistent_snapshots() {
        let config = AlgorithmConfig::demo(100, 2);
        let good = snapshot_with_constant_means(
            &config,
            vec![EliminationRecord::new(Arm::FIRST, 0.4, vec![0.2, 0.7]).unwrap()],
            Vec::new(),
            &[0.2, 0.7],
            10,
        );
        assert!(ElimNs::restore(config.clone(), good.clone()).is_ok());

        let mut bad = good.clone();
        bad.a_min = Arm::FIRST; // frontier no longer matches the record count
        assert!(matches!(
            ElimNs::restore(config.clone(), bad),
            Err(Error::InvalidSnapshot(_))
        ));

        let mut bad = good.clone();
        bad.observation_counts[0][5] = 9; // non-unit count step
        assert!(ElimNs::restore(config.clone(), bad).is_err());

        let mut bad = good;
        bad.reward_sums[1][1] = 2.0; // reward step above 1
        assert!(ElimNs::restore(config, bad).is_err());
    }

    #[test]
    fn arm_and_suffix_types_validate_their_invariants() {
        assert!(Arm::new(0).is_err());
        assert_eq!(Arm::new(3).unwrap().index0(), 2);
        let suffix = RewardSuffix::new(Arm::new(2).unwrap(), vec![0.4, 0.9]).unwrap();
        assert_eq!(suffix.last().get(), 3);
        assert_eq!(suffix.get(Arm::new(3).unwrap()), Some(0.9));
        assert_eq!(suffix.get(Arm::FIRST), None);
        assert!(RewardSuffix::new(Arm::FIRST, Vec::new()).is_err());
        // 1-based JSON encoding round-trips and rejects 0.
        let arm: Arm = serde_json::from_str("2").unwrap();
        assert_eq!(arm.get(), 2);
        assert!(serde_json::from_str::<Arm>("0").is_err());
    }
}
