//! Generators for length-`T` schedules of per-round reward-generating
//! processes with known ground truth.
//!
//! An [`EnvironmentSchedule`] is either an *auction* schedule (a per-round
//! finite-support value distribution plus a price grid, feeding the engine
//! through the censored-observation reduction) or a *direct bandit* schedule
//! (per-round mean vectors with a Bernoulli or deterministic reward law).
//! Builders cover piecewise-constant switching, budgeted mixture drift, and
//! two randomized hard families built from near-indistinguishable two-bidder
//! value distributions. Schedules are immutable after construction and fully
//! determined by (spec, seed) before any algorithm interaction; samplers draw
//! the complete reward information every round regardless of what the
//! algorithm plays, so the environment is oblivious by construction.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::analysis;
use crate::auction::{best_arm, reward_vector, FiniteValueDistribution, PriceGrid, ValueVector};
use crate::bandit::{Arm, RewardSuffix};
use crate::{Error, Result};

/// How per-round bandit rewards are realized from their means.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RewardLaw {
    /// Each arm independently pays 1 with probability equal to its mean.
    Bernoulli,
    /// Each arm pays its mean exactly (zero variance).
    Deterministic,
}

// ---------------------------------------------------------------------------
// Schedule representation
// ---------------------------------------------------------------------------

/// Per-round mean vectors over a piecewise-constant timeline, with the law
/// used to realize rewards from them.
#[derive(Debug, Clone)]
pub struct BanditMeanSchedule {
    num_arms: usize,
    law: RewardLaw,
    segments: Vec<MeanSegment>,
}

#[derive(Debug, Clone)]
struct MeanSegment {
    start: usize,
    end_exclusive: usize,
    means: Vec<f64>,
}

#[derive(Debug, Clone)]
struct AuctionSegment {
    start: usize,
    end_exclusive: usize,
    distribution: FiniteValueDistribution,
    means: Vec<f64>,
}

#[derive(Debug, Clone)]
enum AuctionKind {
    Piecewise(Vec<AuctionSegment>),
    Drifting {
        start: FiniteValueDistribution,
        end: FiniteValueDistribution,
        /// Mixture weight on `end` per round (index `t−1`), non-decreasing.
        weights: Vec<f64>,
        start_means: Vec<f64>,
        end_means: Vec<f64>,
    },
}

#[derive(Debug, Clone)]
enum SchedulePayload {
    Auction { grid: PriceGrid, kind: AuctionKind },
    Bandit(BanditMeanSchedule),
}

/// One round's realized environment output: the full reward vector over all
/// arms (drawn obliviously, whatever the algorithm plays) plus, for auction
/// schedules, the realized bidder values that produced it.
#[derive(Debug, Clone, PartialEq)]
pub struct EnvDraw {
    pub values: Option<ValueVector>,
    pub rewards: Vec<f64>,
}

/// A fixed-length sequence of per-round distributions with known ground
/// truth for regret accounting. See the module docs for the two flavors.
#[derive(Debug, Clone)]
pub struct EnvironmentSchedule {
    horizon: usize,
    payload: SchedulePayload,
    warnings: Vec<String>,
}

impl EnvironmentSchedule {
    pub fn horizon(&self) -> usize {
        self.horizon
    }

    /// Arm count of the induced bandit: grid size for auctions.
    pub fn num_arms(&self) -> usize {
        match &self.payload {
            SchedulePayload::Auction { grid, .. } => grid.num_arms(),
            SchedulePayload::Bandit(b) => b.num_arms,
        }
    }

    pub fn grid(&self) -> Option<&PriceGrid> {
        match &self.payload {
            SchedulePayload::Auction { grid, .. } => Some(grid),
            SchedulePayload::Bandit(_) => None,
        }
    }

    pub fn is_auction(&self) -> bool {
        matches!(self.payload, SchedulePayload::Auction { .. })
    }

    /// Construction warnings (e.g. a parameter outside its calibrated range).
    pub fn warnings(&self) -> &[String] {
        &self.warnings
    }

    fn check_round(&self, t: usize) -> Result<()> {
        if t == 0 || t > self.horizon {
            return Err(Error::RoundOutOfRange {
                round: t,
                horizon: self.horizon,
            });
        }
        Ok(())
    }

    /// The round-`t` value distribution; `None` for direct bandit schedules.
    pub fn distribution_at(&self, t: usize) -> Result<Option<FiniteValueDistribution>> {
        self.check_round(t)?;
        match &self.payload {
            SchedulePayload::Auction { kind, .. } => match kind {
                AuctionKind::Piecewise(segments) => Ok(Some(
                    segment_at(segments, t, |s| (s.start, s.end_exclusive))
                        .distribution
                        .clone(),
                )),
                AuctionKind::Drifting {
                    start,
                    end,
                    weights,
                    ..
                } => Ok(Some(FiniteValueDistribution::mixture(
                    start,
                    end,
                    weights[t - 1],
                )?)),
            },
            SchedulePayload::Bandit(_) => Ok(None),
        }
    }

    /// Exact per-arm mean rewards at round `t` (expected payments for
    /// auctions).
    pub fn means_at(&self, t: usize) -> Result<Vec<f64>> {
        self.check_round(t)?;
        Ok(match &self.payload {
            SchedulePayload::Auction { kind, .. } => match kind {
                AuctionKind::Piecewise(segments) => {
                    segment_at(segments, t, |s| (s.start, s.end_exclusive))
                        .means
                        .clone()
                }
                AuctionKind::Drifting {
                    weights,
                    start_means,
                    end_means,
                    ..
                } => {
                    let w = weights[t - 1];
                    start_means
                        .iter()
                        .zip(end_means)
                        .map(|(&a, &b)| (1.0 - w) * a + w * b)
                        .collect()
                }
            },
            SchedulePayload::Bandit(b) => {
                segment_at(&b.segments, t, |s| (s.start, s.end_exclusive))
                    .means
                    .clone()
            }
        })
    }

    /// The full `T × K` matrix of exact means. Memory scales with both
    /// factors; auction runs at large `T` should override the grid size.
    pub fn mean_matrix(&self) -> Vec<Vec<f64>> {
        (1..=self.horizon)
            .map(|t| self.means_at(t).expect("round within horizon"))
            .collect()
    }

    /// Draw round `t`'s realized rewards (and bidder values for auctions).
    /// Consumes one uniform draw for an auction round, `K` uniform draws for
    /// a Bernoulli bandit round, and none for a deterministic one — always,
    /// independent of any algorithm state.
    pub fn draw<R: Rng + ?Sized>(&self, t: usize, rng: &mut R) -> Result<EnvDraw> {
        self.check_round(t)?;
        match &self.payload {
            SchedulePayload::Auction { grid, kind } => {
                let u = rng.random::<f64>();
                let values = match kind {
                    AuctionKind::Piecewise(segments) => {
                        let seg = segment_at(segments, t, |s| (s.start, s.end_exclusive));
                        pick_atom(seg.distribution.atoms().iter().map(|(v, p)| (v, *p)), u)
                    }
                    AuctionKind::Drifting {
                        start,
                        end,
                        weights,
                        ..
                    } => {
                        let w = weights[t - 1];
                        let scaled = start
                            .atoms()
                            .iter()
                            .map(move |(v, p)| (v, (1.0 - w) * p))
                            .chain(end.atoms().iter().map(move |(v, p)| (v, w * p)));
                        pick_atom(scaled, u)
                    }
                };
                let rewards = reward_vector(&values, grid);
                Ok(EnvDraw {
                    values: Some(values),
                    rewards,
                })
            }
            SchedulePayload::Bandit(b) => {
                let seg = segment_at(&b.segments, t, |s| (s.start, s.end_exclusive));
                let rewards = match b.law {
                    RewardLaw::Deterministic => seg.means.clone(),
                    RewardLaw::Bernoulli => seg
                        .means
                        .iter()
                        .map(|&m| if rng.random::<f64>() < m { 1.0 } else { 0.0 })
                        .collect(),
                };
                Ok(EnvDraw {
                    values: None,
                    rewards,
                })
            }
        }
    }

    /// The reward suffix revealed by playing `arm` on this draw. Auction
    /// schedules go through the censored-bid computation (using only bids
    /// that cleared the announced reserve); bandit schedules slice the drawn
    /// reward vector.
    pub fn observed(&self, draw: &EnvDraw, arm: Arm) -> Result<RewardSuffix> {
        match &self.payload {
            SchedulePayload::Auction { grid, .. } => {
                let values = draw.values.as_ref().expect("auction draws carry values");
                crate::auction::observed_suffix(values, grid, arm)
            }
            SchedulePayload::Bandit(b) => {
                if arm.get() > b.num_arms {
                    return Err(Error::ArmOutOfRange {
                        arm: arm.get(),
                        num_arms: b.num_arms,
                    });
                }
                RewardSuffix::new(arm, draw.rewards[arm.index0()..].to_vec())
            }
        }
    }

    /// Rounds `t ≥ 2` whose distribution differs from round `t−1`'s.
    pub fn change_rounds(&self) -> Vec<usize> {
        match &self.payload {
            SchedulePayload::Auction { kind, .. } => match kind {
                AuctionKind::Piecewise(segments) => segments
                    .windows(2)
                    .filter(|w| !w[0].distribution.same_distribution(&w[1].distribution))
                    .map(|w| w[1].start)
                    .collect(),
                AuctionKind::Drifting {
                    start,
                    end,
                    weights,
                    ..
                } => {
                    if start.same_distribution(end) {
                        return Vec::new();
                    }
                    (2..=self.horizon)
                        .filter(|&t| weights[t - 1] != weights[t - 2])
                        .collect()
                }
            },
            SchedulePayload::Bandit(b) => b
                .segments
                .windows(2)
                .filter(|w| w[0].means != w[1].means)
                .map(|w| w[1].start)
                .collect(),
        }
    }

    /// Total variation distance between consecutive rounds' distributions,
    /// summed over the horizon; `None` for direct bandit schedules.
    pub fn tv_variation(&self) -> Option<f64> {
        match &self.payload {
            SchedulePayload::Auction { kind, .. } => Some(match kind {
                AuctionKind::Piecewise(segments) => segments
                    .windows(2)
                    .map(|w| analysis::tv_distance(&w[0].distribution, &w[1].distribution))
                    .sum(),
                AuctionKind::Drifting {
                    start,
                    end,
                    weights,
                    ..
                } => {
                    let step = analysis::tv_distance(start, end);
                    weights.windows(2).map(|w| (w[1] - w[0]).abs() * step).sum()
                }
            }),
            SchedulePayload::Bandit(_) => None,
        }
    }

    /// Sum over rounds of the largest per-arm mean change, on the induced
    /// (or direct) bandit means.
    pub fn mean_variation(&self) -> f64 {
        let mut total = 0.0;
        let mut prev: Option<Vec<f64>> = None;
        for t in 1..=self.horizon {
            let row = self.means_at(t).expect("round within horizon");
            if let Some(prev) = prev {
                let step = row
                    .iter()
                    .zip(&prev)
                    .map(|(a, b)| (a - b).abs())
                    .fold(0.0, f64::max);
                total += step;
            }
            prev = Some(row);
        }
        total
    }

    /// Ground-truth audit: switch count, variation measures, and the
    /// per-round best arm compressed into runs.
    pub fn audit(&self) -> ScheduleAudit {
        let change_rounds = self.change_rounds();
        let mut runs: Vec<BestArmRun> = Vec::new();
        for t in 1..=self.horizon {
            let means = self.means_at(t).expect("round within horizon");
            let (arm, mean) = best_arm(&means);
            match runs.last_mut() {
                Some(run) if run.arm == arm => run.end_exclusive = t + 1,
                _ => runs.push(BestArmRun {
                    start: t,
                    end_exclusive: t + 1,
                    arm,
                    mean,
                }),
            }
        }
        ScheduleAudit {
            switch_count: 1 + change_rounds.len(),
            change_rounds,
            auction_variation: self.tv_variation(),
            bandit_variation: self.mean_variation(),
            best_arm_runs: runs,
            warnings: self.warnings.clone(),
        }
    }
}

/// Locate the segment containing round `t` by binary search.
fn segment_at<S>(segments: &[S], t: usize, bounds: impl Fn(&S) -> (usize, usize)) -> &S {
    let idx = segments.partition_point(|s| bounds(s).1 <= t);
    let seg = &segments[idx];
    debug_assert!(bounds(seg).0 <= t && t < bounds(seg).1);
    seg
}

/// Select an atom by cumulative probability; the final atom absorbs any
/// floating-point residue.
fn pick_atom<'a>(atoms: impl Iterator<Item = (&'a ValueVector, f64)>, u: f64) -> ValueVector {
    let mut cumulative = 0.0;
    let mut last: Option<&ValueVector> = None;
    for (values, p) in atoms {
        cumulative += p;
        last = Some(values);
        if u < cumulative {
            return values.clone();
        }
    }
    last.expect("distributions have at least one atom").clone()
}

/// Ground truth reported by [`EnvironmentSchedule::audit`].
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ScheduleAudit {
    /// `1 +` the number of rounds whose distribution differs from the
    /// previous round's.
    pub switch_count: usize,
    /// The differing rounds themselves.
    pub change_rounds: Vec<usize>,
    /// Summed consecutive total-variation distances (auction schedules only).
    pub auction_variation: Option<f64>,
    /// Summed per-round maximal mean changes of the induced bandit.
    pub bandit_variation: f64,
    /// Per-round best arm, compressed into maximal constant runs; `mean` is
    /// the best mean at the run's first round.
    pub best_arm_runs: Vec<BestArmRun>,
    pub warnings: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BestArmRun {
    pub start: usize,
    pub end_exclusive: usize,
    pub arm: Arm,
    pub mean: f64,
}

// ---------------------------------------------------------------------------
// Builders
// ---------------------------------------------------------------------------

fn invalid(reason: impl Into<String>) -> Error {
    Error::InvalidSchedule(reason.into())
}

/// Piecewise-constant auction schedule from `(length, distribution)` pieces;
/// the horizon is the total length.
pub fn build_switching(
    segments: Vec<(usize, FiniteValueDistribution)>,
    grid: PriceGrid,
) -> Result<EnvironmentSchedule> {
    if segments.is_empty() {
        return Err(invalid("a switching schedule needs at least one segment"));
    }
    let mut built = Vec::with_capacity(segments.len());
    let mut start = 1usize;
    for (length, distribution) in segments {
        if length == 0 {
            return Err(invalid("segment lengths must be at least 1"));
        }
        let means = distribution.mean_vector(&grid);
        built.push(AuctionSegment {
            start,
            end_exclusive: start + length,
            distribution,
            means,
        });
        start += length;
    }
    Ok(EnvironmentSchedule {
        horizon: start - 1,
        payload: SchedulePayload::Auction {
            grid,
            kind: AuctionKind::Piecewise(built),
        },
        warnings: Vec::new(),
    })
}

/// Linear mixture drift from `start` to `end` under a total-variation budget:
/// round `t` uses `D_t = (1−w_t)·start + w_t·end` with `w_t` rising linearly
/// from 0 and freezing once the accumulated variation would exceed the
/// budget. Mixture interpolation makes the spent budget exactly
/// `w_T · TV(start, end)`.
pub fn build_drifting(
    start: FiniteValueDistribution,
    end: FiniteValueDistribution,
    horizon: usize,
    variation_budget: f64,
    grid: PriceGrid,
) -> Result<EnvironmentSchedule> {
    if horizon == 0 {
        return Err(Error::ZeroHorizon);
    }
    if !(variation_budget >= 0.0 && variation_budget.is_finite()) {
        return Err(invalid("variation budget must be non-negative and finite"));
    }
    let support = |d: &FiniteValueDistribution| -> Vec<Vec<f64>> {
        d.canonical_atoms().into_iter().map(|(v, _)| v).collect()
    };
    if support(&start) != support(&end) {
        return Err(invalid("drift endpoints must share the same atom support"));
    }
    let step = analysis::tv_distance(&start, &end);
    let w_max = if step > 0.0 {
        (variation_budget / step).min(1.0)
    } else {
        1.0
    };
    let weights: Vec<f64> = (1..=horizon)
        .map(|t| {
            if horizon == 1 {
                0.0
            } else {
                ((t - 1) as f64 / (horizon - 1) as f64).min(w_max)
            }
        })
        .collect();
    let start_means = start.mean_vector(&grid);
    let end_means = end.mean_vector(&grid);
    Ok(EnvironmentSchedule {
        horizon,
        payload: SchedulePayload::Auction {
            grid,
            kind: AuctionKind::Drifting {
                start,
                end,
                weights,
                start_means,
                end_means,
            },
        },
        warnings: Vec::new(),
    })
}

/// Two i.i.d. bidders with values in {1/2, 3/4}, where the low value has
/// probability `1/2 + eps` (`eps` may be negative; `|eps| < 1/2`). A positive
/// bias makes the low reserve optimal, a negative one the high reserve —
/// while the distributions stay within `O(eps)` of each other.
pub fn hard_pair_distribution(eps: f64) -> Result<FiniteValueDistribution> {
    if !(eps.is_finite() && eps.abs() < 0.5) {
        return Err(invalid(format!(
            "hard-pair bias {eps} must satisfy |eps| < 1/2"
        )));
    }
    let p_low = 0.5 + eps;
    let p_high = 1.0 - p_low;
    let vv = |values: &[f64]| ValueVector::new(values.to_vec());
    FiniteValueDistribution::new(vec![
        (vv(&[0.5, 0.5])?, p_low * p_low),
        (vv(&[0.5, 0.75])?, p_low * p_high),
        (vv(&[0.75, 0.5])?, p_high * p_low),
        (vv(&[0.75, 0.75])?, p_high * p_high),
    ])
}

/// Randomized hard switching family: `num_segments` near-equal segments,
/// each an independent ±-biased hard pair with `eps = c_eps/√(segment
/// length)` — large enough to matter over a segment, small enough to be hard
/// to detect faster. One uniform draw per segment decides the sign.
pub fn build_lower_bound_switching<R: Rng + ?Sized>(
    num_segments: usize,
    horizon: usize,
    c_eps: f64,
    grid: PriceGrid,
    rng: &mut R,
) -> Result<EnvironmentSchedule> {
    if horizon == 0 {
        return Err(Error::ZeroHorizon);
    }
    if num_segments == 0 || num_segments > horizon {
        return Err(invalid(format!(
            "segment count {num_segments} must lie in [1, horizon]"
        )));
    }
    if !(c_eps > 0.0 && c_eps.is_finite()) {
        return Err(invalid("c_eps must be positive and finite"));
    }
    let base_len = horizon / num_segments;
    let eps = c_eps / (base_len as f64).sqrt();
    if eps >= 0.5 {
        return Err(invalid(format!(
            "bias {eps} ≥ 1/2: segments too short for this c_eps"
        )));
    }
    let mut segments = Vec::with_capacity(num_segments);
    for s in 0..num_segments {
        let sign = if rng.random::<f64>() < 0.5 { 1.0 } else { -1.0 };
        let length = if s + 1 == num_segments {
            horizon - base_len * (num_segments - 1)
        } else {
            base_len
        };
        segments.push((length, hard_pair_distribution(sign * eps)?));
    }
    build_switching(segments, grid)
}

/// Randomized hard drifting family for a variation budget `V̄`: segments of
/// length `Δ = ⌈(T/V̄)^{2/3}⌉` with per-segment bias `±c_eps·(V̄/T)^{1/3}`,
/// signs i.i.d. per segment. Budgets below 1 are outside the calibrated
/// regime and only produce a warning.
pub fn build_lower_bound_dynamic<R: Rng + ?Sized>(
    variation_budget: f64,
    horizon: usize,
    c_eps: f64,
    grid: PriceGrid,
    rng: &mut R,
) -> Result<EnvironmentSchedule> {
    if horizon == 0 {
        return Err(Error::ZeroHorizon);
    }
    if !(variation_budget > 0.0 && variation_budget.is_finite()) {
        return Err(invalid("variation budget must be positive and finite"));
    }
    if !(c_eps > 0.0 && c_eps.is_finite()) {
        return Err(invalid("c_eps must be positive and finite"));
    }
    let t = horizon as f64;
    let delta = ((t / variation_budget).powf(2.0 / 3.0).ceil() as usize).clamp(1, horizon);
    let eps = c_eps * (variation_budget / t).powf(1.0 / 3.0);
    if eps >= 0.5 {
        return Err(invalid(format!(
            "bias {eps} ≥ 1/2: variation budget too large for this c_eps"
        )));
    }
    let count = horizon.div_ceil(delta);
    let mut segments = Vec::with_capacity(count);
    for s in 0..count {
        let sign = if rng.random::<f64>() < 0.5 { 1.0 } else { -1.0 };
        let length = if s + 1 == count {
            horizon - delta * (count - 1)
        } else {
            delta
        };
        segments.push((length, hard_pair_distribution(sign * eps)?));
    }
    let mut schedule = build_switching(segments, grid)?;
    if variation_budget < 1.0 {
        schedule.warnings.push(format!(
            "variation budget {variation_budget} is below 1, outside the dynamic-regime calibration"
        ));
    }
    Ok(schedule)
}

/// Direct bandit schedule from `(length, means)` pieces; the horizon is the
/// total length.
pub fn build_piecewise_bandit(
    law: RewardLaw,
    segments: Vec<(usize, Vec<f64>)>,
) -> Result<EnvironmentSchedule> {
    if segments.is_empty() {
        return Err(invalid("a bandit schedule needs at least one segment"));
    }
    let num_arms = segments[0].1.len();
    if num_arms == 0 {
        return Err(invalid("bandit schedules need at least one arm"));
    }
    let mut built = Vec::with_capacity(segments.len());
    let mut start = 1usize;
    for (length, means) in segments {
        if length == 0 {
            return Err(invalid("segment lengths must be at least 1"));
        }
        if means.len() != num_arms {
            return Err(invalid(format!(
                "segment has {} means, expected {num_arms}",
                means.len()
            )));
        }
        if means.iter().any(|m| !(0.0..=1.0).contains(m)) {
            return Err(invalid("bandit means must lie in [0, 1]"));
        }
        built.push(MeanSegment {
            start,
            end_exclusive: start + length,
            means,
        });
        start += length;
    }
    Ok(EnvironmentSchedule {
        horizon: start - 1,
        payload: SchedulePayload::Bandit(BanditMeanSchedule {
            num_arms,
            law,
            segments: built,
        }),
        warnings: Vec::new(),
    })
}
