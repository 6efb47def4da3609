//! Ground-truth diagnostics: non-stationarity measures, regret accounting,
//! the variation-balanced interval partition, and a concentration audit for
//! realized reward draws.
//!
//! Everything here works on exact schedule data (mean matrices, value
//! distributions) and treats the algorithm's behaviour as input, so these
//! functions double as independent oracles for the engine's tests.

use serde::Serialize;

use crate::auction::FiniteValueDistribution;
use crate::bandit::Arm;
use crate::env::EnvironmentSchedule;
use crate::{Error, Result};

// ---------------------------------------------------------------------------
// Non-stationarity measures
// ---------------------------------------------------------------------------

/// Number of piecewise-stationary blocks: `1 +` the number of rounds whose
/// distribution differs from the previous round's.
pub fn count_switchings(schedule: &EnvironmentSchedule) -> usize {
    1 + schedule.change_rounds().len()
}

/// Total variation distance between two finite-support distributions: half
/// the L1 distance of their probability masses over the union support.
pub fn tv_distance(d1: &FiniteValueDistribution, d2: &FiniteValueDistribution) -> f64 {
    let a = d1.canonical_atoms();
    let b = d2.canonical_atoms();
    let mut i = 0;
    let mut j = 0;
    let mut l1 = 0.0;
    while i < a.len() || j < b.len() {
        if i == a.len() {
            l1 += b[j].1;
            j += 1;
        } else if j == b.len() {
            l1 += a[i].1;
            i += 1;
        } else {
            match a[i].0.partial_cmp(&b[j].0).expect("atom values are finite") {
                std::cmp::Ordering::Less => {
                    l1 += a[i].1;
                    i += 1;
                }
                std::cmp::Ordering::Greater => {
                    l1 += b[j].1;
                    j += 1;
                }
                std::cmp::Ordering::Equal => {
                    l1 += (a[i].1 - b[j].1).abs();
                    i += 1;
                    j += 1;
                }
            }
        }
    }
    0.5 * l1
}

/// Summed consecutive total-variation distances over the schedule's rounds;
/// `None` for direct bandit schedules, where the measure is undefined.
pub fn variation_auction(schedule: &EnvironmentSchedule) -> Option<f64> {
    schedule.tv_variation()
}

/// Drift variation of a dense `T × K` mean matrix: the sum over rounds of
/// the largest single-arm mean change.
pub fn variation_bandit(means: &[Vec<f64>]) -> Result<f64> {
    check_mean_matrix(means)?;
    Ok(means
        .windows(2)
        .map(|w| {
            w[0].iter()
                .zip(&w[1])
                .map(|(a, b)| (a - b).abs())
                .fold(0.0, f64::max)
        })
        .sum())
}

fn check_mean_matrix(means: &[Vec<f64>]) -> Result<()> {
    let Some(first) = means.first() else {
        return Err(Error::InvalidMeans("mean matrix is empty".into()));
    };
    if first.is_empty() {
        return Err(Error::InvalidMeans("mean matrix has zero arms".into()));
    }
    let k = first.len();
    for (t, row) in means.iter().enumerate() {
        if row.len() != k {
            return Err(Error::InvalidMeans(format!(
                "row {} has {} entries, expected {k}",
                t + 1,
                row.len()
            )));
        }
        if row.iter().any(|m| !m.is_finite()) {
            return Err(Error::InvalidMeans(format!(
                "row {} has a non-finite mean",
                t + 1
            )));
        }
    }
    Ok(())
}

// ---------------------------------------------------------------------------
// Variation-balanced interval partition
// ---------------------------------------------------------------------------

/// One interval of the partition, with inclusive 1-based round endpoints and
/// the drift variation accumulated strictly inside it.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct IntervalStat {
    pub start: usize,
    pub end: usize,
    pub variation: f64,
}

/// The greedy variation-balanced partition of a mean timeline.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PartitionResult {
    pub intervals: Vec<IntervalStat>,
}

impl PartitionResult {
    /// Number of intervals.
    pub fn gamma(&self) -> usize {
        self.intervals.len()
    }
}

/// Greedily split `[1, T]` into maximal intervals whose internal variation
/// stays below `√(budget / length)`: an interval closes at round `t` exactly
/// when extending it to `t+1` would break that bound (the final interval
/// closes at `T` regardless, and satisfies the bound by construction).
/// Requires `0 < budget ≤ 1/2`.
pub fn interval_partition(means: &[Vec<f64>], budget: f64) -> Result<PartitionResult> {
    if !(budget > 0.0 && budget <= 0.5) {
        return Err(Error::BadPartitionBudget { c3: budget });
    }
    check_mean_matrix(means)?;
    let step = |t: usize| -> f64 {
        // Largest per-arm change from round t−1 to round t (1-based).
        means[t - 1]
            .iter()
            .zip(&means[t - 2])
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max)
    };
    let horizon = means.len();
    let mut intervals = Vec::new();
    let mut start = 1usize;
    let mut variation = 0.0f64;
    for t in 1..=horizon {
        if t > start {
            variation += step(t);
        }
        let length = t - start + 1;
        let close = if t == horizon {
            true
        } else {
            variation <= (budget / length as f64).sqrt()
                && variation + step(t + 1) > (budget / (length + 1) as f64).sqrt()
        };
        if close {
            intervals.push(IntervalStat {
                start,
                end: t,
                variation,
            });
            start = t + 1;
            variation = 0.0;
        }
    }
    Ok(PartitionResult { intervals })
}

// ---------------------------------------------------------------------------
// Regret accounting
// ---------------------------------------------------------------------------

/// Per-round and cumulative pseudo-regret of a play sequence.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RegretCurve {
    pub instantaneous: Vec<f64>,
    pub cumulative: Vec<f64>,
}

impl RegretCurve {
    pub fn final_regret(&self) -> f64 {
        self.cumulative.last().copied().unwrap_or(0.0)
    }
}

/// Pseudo-regret against the per-round best mean: round `t` contributes
/// `max_a μ_t(a) − μ_t(played arm)`.
pub fn pseudo_regret(means: &[Vec<f64>], plays: &[Arm]) -> Result<RegretCurve> {
    check_mean_matrix(means)?;
    if plays.len() != means.len() {
        return Err(Error::InvalidMeans(format!(
            "{} plays for {} rounds",
            plays.len(),
            means.len()
        )));
    }
    let num_arms = means[0].len();
    let mut instantaneous = Vec::with_capacity(plays.len());
    let mut cumulative = Vec::with_capacity(plays.len());
    let mut total = 0.0;
    for (row, arm) in means.iter().zip(plays) {
        if arm.get() > num_arms {
            return Err(Error::ArmOutOfRange {
                arm: arm.get(),
                num_arms,
            });
        }
        let best = row.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let inst = best - row[arm.index0()];
        total += inst;
        instantaneous.push(inst);
        cumulative.push(total);
    }
    Ok(RegretCurve {
        instantaneous,
        cumulative,
    })
}

// ---------------------------------------------------------------------------
// Concentration audit
// ---------------------------------------------------------------------------

/// Above this horizon the audit checks dyadically aligned windows instead of
/// every interval (the all-pairs scan is quadratic in `T`).
pub const SAMPLING_NICE_EXACT_LIMIT: usize = 2000;

/// The confidence radius used by the audit: `√(ln(K·T³) / (2n))` for a
/// window holding `n` rounds.
pub fn concentration_radius(n: usize, num_arms: usize, horizon: usize) -> f64 {
    let log_term = ((num_arms as f64) * (horizon as f64).powi(3)).ln();
    (log_term / (2.0 * n as f64)).sqrt()
}

/// One window whose empirical average strayed at least its radius from the
/// true average.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct NiceViolation {
    pub arm: Arm,
    pub start: usize,
    pub end: usize,
    pub deviation: f64,
    pub radius: f64,
}

/// Outcome of the concentration audit.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SamplingNiceReport {
    pub intervals_checked: u64,
    pub violation_count: u64,
    /// At most the first 100 violations, in scan order.
    pub violations: Vec<NiceViolation>,
}

impl SamplingNiceReport {
    pub fn is_nice(&self) -> bool {
        self.violation_count == 0
    }
}

/// Check every audited window `[s, e]` and arm for deviations of the
/// empirical average from the true average by at least the confidence
/// radius. `rewards` and `means` are dense `T × K` matrices of realized
/// draws and exact means. Horizons up to [`SAMPLING_NICE_EXACT_LIMIT`] scan
/// all intervals; larger ones scan dyadically aligned blocks.
pub fn sampling_nice_check(rewards: &[Vec<f64>], means: &[Vec<f64>]) -> Result<SamplingNiceReport> {
    check_mean_matrix(means)?;
    check_mean_matrix(rewards)?;
    let horizon = means.len();
    let num_arms = means[0].len();
    if rewards.len() != horizon || rewards[0].len() != num_arms {
        return Err(Error::InvalidMeans(format!(
            "reward matrix is {}×{}, mean matrix is {horizon}×{num_arms}",
            rewards.len(),
            rewards[0].len()
        )));
    }
    // Per-arm prefix sums over rounds: index t holds the sum of rounds 1..=t.
    let mut reward_prefix = vec![vec![0.0f64; horizon + 1]; num_arms];
    let mut mean_prefix = vec![vec![0.0f64; horizon + 1]; num_arms];
    for t in 1..=horizon {
        for a in 0..num_arms {
            reward_prefix[a][t] = reward_prefix[a][t - 1] + rewards[t - 1][a];
            mean_prefix[a][t] = mean_prefix[a][t - 1] + means[t - 1][a];
        }
    }
    let mut report = SamplingNiceReport {
        intervals_checked: 0,
        violation_count: 0,
        violations: Vec::new(),
    };
    let mut check = |start: usize, end: usize| {
        let n = end - start + 1;
        let radius = concentration_radius(n, num_arms, horizon);
        for a in 0..num_arms {
            report.intervals_checked += 1;
            let emp = (reward_prefix[a][end] - reward_prefix[a][start - 1]) / n as f64;
            let truth = (mean_prefix[a][end] - mean_prefix[a][start - 1]) / n as f64;
            let deviation = (emp - truth).abs();
            if deviation >= radius {
                report.violation_count += 1;
                if report.violations.len() < 100 {
                    report.violations.push(NiceViolation {
                        arm: Arm::new(a + 1).expect("arm index is positive"),
                        start,
                        end,
                        deviation,
                        radius,
                    });
                }
            }
        }
    };
    if horizon <= SAMPLING_NICE_EXACT_LIMIT {
        for start in 1..=horizon {
            for end in start..=horizon {
                check(start, end);
            }
        }
    } else {
        let mut block = 1usize;
        while block <= horizon {
            let mut start = 1usize;
            while start + block - 1 <= horizon {
                check(start, start + block - 1);
                start += block;
            }
            block *= 2;
        }
    }
    Ok(report)
}

// ---------------------------------------------------------------------------
// Run traces
// ---------------------------------------------------------------------------

/// What the harness records about a single round.
#[derive(Debug, Clone, PartialEq)]
pub struct RoundRecord {
    pub round: usize,
    pub arm: Arm,
    pub in_exploration: bool,
    pub d_max: Option<f64>,
    pub epoch: usize,
    pub restarted: bool,
    pub eliminations: usize,
}

/// A full per-round account of one run: decisions plus the schedule's exact
/// means (and optionally the realized reward draws, for concentration
/// audits).
#[derive(Debug, Clone, PartialEq)]
pub struct RunTrace {
    pub rounds: Vec<RoundRecord>,
    pub means: Vec<Vec<f64>>,
    pub draws: Option<Vec<Vec<f64>>>,
}

impl RunTrace {
    pub fn plays(&self) -> Vec<Arm> {
        self.rounds.iter().map(|r| r.arm).collect()
    }

    pub fn pseudo_regret(&self) -> Result<RegretCurve> {
        pseudo_regret(&self.means, &self.plays())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::auction::{PriceGrid, ValueVector};
    use crate::env::{
        build_drifting, build_piecewise_bandit, build_switching, hard_pair_distribution, RewardLaw,
    };
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha12Rng;

    fn grid() -> PriceGrid {
        PriceGrid::new(vec![0.5, 0.75]).unwrap()
    }

    #[test]
    fn switch_counts_match_hand_timelines() {
        let d1 = hard_pair_distribution(0.1).unwrap();
        let d2 = hard_pair_distribution(-0.1).unwrap();
        // Timeline D1 D1 D2 D2 D1 as three segments.
        let schedule = build_switching(
            vec![(2, d1.clone()), (2, d2.clone()), (1, d1.clone())],
            grid(),
        )
        .unwrap();
        assert_eq!(count_switchings(&schedule), 3);
        let constant = build_switching(vec![(5, d1.clone())], grid()).unwrap();
        assert_eq!(count_switchings(&constant), 1);
        let alternating = build_switching(
            vec![
                (1, d1.clone()),
                (1, d2.clone()),
                (1, d1.clone()),
                (1, d2.clone()),
                (1, d1),
            ],
            grid(),
        )
        .unwrap();
        assert_eq!(count_switchings(&alternating), 5);
    }

    #[test]
    fn tv_distance_matches_hand_values() {
        let d1 = hard_pair_distribution(0.1).unwrap();
        let d2 = hard_pair_distribution(-0.1).unwrap();
        // Masses (0.36, 0.24, 0.24, 0.16) vs (0.16, 0.24, 0.24, 0.36):
        // half of |0.2| + 0 + 0 + |0.2| = 0.2.
        assert!((tv_distance(&d1, &d2) - 0.2).abs() < 1e-12);
        assert_eq!(tv_distance(&d1, &d1), 0.0);
        // Disjoint supports are at distance 1.
        let a = FiniteValueDistribution::point_mass(ValueVector::new(vec![0.1]).unwrap());
        let b = FiniteValueDistribution::point_mass(ValueVector::new(vec![0.9]).unwrap());
        assert_eq!(tv_distance(&a, &b), 1.0);
        // Symmetry on a random pair.
        assert_eq!(tv_distance(&d1, &d2), tv_distance(&d2, &d1));
    }

    #[test]
    fn auction_variation_sums_boundary_distances() {
        let d1 = hard_pair_distribution(0.1).unwrap();
        let d2 = hard_pair_distribution(-0.1).unwrap();
        let schedule = build_switching(vec![(500, d1.clone()), (500, d2.clone())], grid()).unwrap();
        assert!((variation_auction(&schedule).unwrap() - 0.2).abs() < 1e-12);
        let mut segments = Vec::new();
        for k in 0..6 {
            let d = if k % 2 == 0 { d1.clone() } else { d2.clone() };
            segments.push((10, d));
        }
        let schedule = build_switching(segments, grid()).unwrap();
        assert!((variation_auction(&schedule).unwrap() - 5.0 * 0.2).abs() < 1e-12);
        let bandit = build_piecewise_bandit(RewardLaw::Bernoulli, vec![(10, vec![0.5])]).unwrap();
        assert_eq!(variation_auction(&bandit), None);
    }

    #[test]
    fn bandit_variation_matches_hand_values() {
        // Rows (0.2, 0.8) → (0.7, 0.9) → (0.7, 0.9): max steps 0.5 then 0.
        let means = vec![vec![0.2, 0.8], vec![0.7, 0.9], vec![0.7, 0.9]];
        assert!((variation_bandit(&means).unwrap() - 0.5).abs() < 1e-15);
        // Worked single-jump example: one arm moves by 0.6.
        let means = vec![vec![0.1, 0.3], vec![0.7, 0.3]];
        assert!((variation_bandit(&means).unwrap() - 0.6).abs() < 1e-15);
        assert_eq!(variation_bandit(&vec![vec![0.4; 3]; 7]).unwrap(), 0.0);
        assert_eq!(variation_bandit(&[vec![0.4]]).unwrap(), 0.0);
        assert!(variation_bandit(&[]).is_err());
        assert!(variation_bandit(&[vec![0.1], vec![0.1, 0.2]]).is_err());
    }

    #[test]
    fn audit_variation_matches_the_dense_recomputation_exactly() {
        let d1 = hard_pair_distribution(0.08).unwrap();
        let d2 = hard_pair_distribution(-0.12).unwrap();
        for schedule in [
            build_switching(
                vec![(7, d1.clone()), (11, d2.clone()), (5, d1.clone())],
                grid(),
            )
            .unwrap(),
            build_drifting(d1, d2, 60, 0.13, grid()).unwrap(),
        ] {
            let audit = schedule.audit();
            let dense = variation_bandit(&schedule.mean_matrix()).unwrap();
            assert_eq!(audit.bandit_variation, dense);
        }
    }

    #[test]
    fn partition_of_a_constant_timeline_is_one_interval() {
        let means = vec![vec![0.3, 0.6]; 100];
        let partition = interval_partition(&means, 0.5).unwrap();
        assert_eq!(partition.gamma(), 1);
        assert_eq!(
            partition.intervals[0],
            IntervalStat {
                start: 1,
                end: 100,
                variation: 0.0
            }
        );
    }

    #[test]
    fn partition_splits_unit_jumps_into_singletons() {
        // Means alternate 0 and 1 every round: any 2-round interval has
        // variation 1 > √(0.5/2), so every interval is a single round.
        let means: Vec<Vec<f64>> = (0..4).map(|t| vec![(t % 2) as f64]).collect();
        let partition = interval_partition(&means, 0.5).unwrap();
        assert_eq!(partition.gamma(), 4);
        for (idx, interval) in partition.intervals.iter().enumerate() {
            assert_eq!((interval.start, interval.end), (idx + 1, idx + 1));
            assert_eq!(interval.variation, 0.0);
        }
    }

    #[test]
    fn partition_intervals_satisfy_the_variation_bound() {
        let mut rng = ChaCha12Rng::seed_from_u64(21);
        for _ in 0..20 {
            let horizon = rng.random_range(2..400);
            let num_arms = rng.random_range(1..4);
            let mut means = Vec::with_capacity(horizon);
            let mut row: Vec<f64> = (0..num_arms).map(|_| rng.random::<f64>()).collect();
            for _ in 0..horizon {
                if rng.random::<f64>() < 0.3 {
                    let a = rng.random_range(0..num_arms);
                    row[a] = (row[a] + rng.random::<f64>() * 0.3 - 0.15).clamp(0.0, 1.0);
                }
                means.push(row.clone());
            }
            let partition = interval_partition(&means, 0.5).unwrap();
            let mut expected_start = 1;
            for interval in &partition.intervals {
                assert_eq!(interval.start, expected_start);
                let length = interval.end - interval.start + 1;
                assert!(
                    interval.variation <= (0.5 / length as f64).sqrt() + 1e-12,
                    "interval [{}, {}] carries variation {}",
                    interval.start,
                    interval.end,
                    interval.variation
                );
                // Cross-check the recorded variation against the dense measure.
                let dense = variation_bandit(&means[interval.start - 1..interval.end]).unwrap();
                assert!((interval.variation - dense).abs() < 1e-12);
                expected_start = interval.end + 1;
            }
            assert_eq!(expected_start, horizon + 1);
        }
        assert!(matches!(
            interval_partition(&[vec![0.5]], 0.0),
            Err(Error::BadPartitionBudget { .. })
        ));
        assert!(interval_partition(&[vec![0.5]], 0.6).is_err());
    }

    #[test]
    fn pseudo_regret_matches_hand_values() {
        let means = vec![vec![0.2, 0.6], vec![0.2, 0.6], vec![0.9, 0.6]];
        let plays = vec![
            Arm::new(1).unwrap(),
            Arm::new(2).unwrap(),
            Arm::new(2).unwrap(),
        ];
        let curve = pseudo_regret(&means, &plays).unwrap();
        assert!((curve.instantaneous[0] - 0.4).abs() < 1e-15);
        assert_eq!(curve.instantaneous[1], 0.0);
        assert!((curve.instantaneous[2] - 0.3).abs() < 1e-15);
        assert!((curve.final_regret() - 0.7).abs() < 1e-15);
        assert!(pseudo_regret(&means, &plays[..2]).is_err());
        assert!(pseudo_regret(&means, &[Arm::new(3).unwrap(); 3]).is_err());
    }

    #[test]
    fn concentration_radius_matches_hand_value() {
        // n = 100, K = 10, T = 1000: √(ln(10·10⁹)/200) = √(ln(10¹⁰)/200).
        let r = concentration_radius(100, 10, 1000);
        let expected = (10.0f64.powi(10).ln() / 200.0).sqrt();
        assert!((r - expected).abs() < 1e-15);
        assert!((r - 0.3393070212207556).abs() < 1e-12);
    }

    #[test]
    fn deterministic_rewards_are_always_nice() {
        let means = vec![vec![0.3, 0.8]; 500];
        let report = sampling_nice_check(&means, &means).unwrap();
        assert!(report.is_nice());
        // All intervals of [1, 500], two arms each.
        assert_eq!(report.intervals_checked, 500 * 501 / 2 * 2);
    }

    #[test]
    fn gross_deviations_are_flagged() {
        // Claimed mean 0.9 but every realized reward is 0: the deviation on
        // long windows dwarfs any radius.
        let means = vec![vec![0.9]; 200];
        let rewards = vec![vec![0.0]; 200];
        let report = sampling_nice_check(&rewards, &means).unwrap();
        assert!(!report.is_nice());
        let worst = &report.violations[0];
        assert_eq!(worst.arm.get(), 1);
        assert!(worst.deviation > worst.radius);
        assert!(report.violations.len() <= 100);
    }

    #[test]
    fn large_horizons_use_the_dyadic_family() {
        let horizon = SAMPLING_NICE_EXACT_LIMIT + 48;
        let means = vec![vec![0.5]; horizon];
        let report = sampling_nice_check(&means, &means).unwrap();
        // Dyadic block counts: Σ_h ⌊T / 2^h⌋ windows, one arm each.
        let mut expected = 0u64;
        let mut block = 1;
        while block <= horizon {
            expected += (horizon / block) as u64;
            block *= 2;
        }
        assert_eq!(report.intervals_checked, expected);
        assert!(report.is_nice());
    }

    #[test]
    fn realized_bernoulli_draws_are_typically_nice() {
        let schedule =
            build_piecewise_bandit(RewardLaw::Bernoulli, vec![(800, vec![0.35, 0.65])]).unwrap();
        let means = schedule.mean_matrix();
        let mut rng = ChaCha12Rng::seed_from_u64(33);
        let rewards: Vec<Vec<f64>> = (1..=800)
            .map(|t| schedule.draw(t, &mut rng).unwrap().rewards)
            .collect();
        let report = sampling_nice_check(&rewards, &means).unwrap();
        assert!(
            report.is_nice(),
            "unexpected violations: {:?}",
            report.violations.first()
        );
    }

    #[test]
    fn run_trace_regret_uses_played_arms() {
        let trace = RunTrace {
            rounds: vec![
                RoundRecord {
                    round: 1,
                    arm: Arm::new(2).unwrap(),
                    in_exploration: false,
                    d_max: None,
                    epoch: 1,
                    restarted: false,
                    eliminations: 0,
                },
                RoundRecord {
                    round: 2,
                    arm: Arm::new(1).unwrap(),
                    in_exploration: true,
                    d_max: Some(0.5),
                    epoch: 1,
                    restarted: false,
                    eliminations: 1,
                },
            ],
            means: vec![vec![0.2, 0.7], vec![0.2, 0.7]],
            draws: None,
        };
        let curve = trace.pseudo_regret().unwrap();
        assert_eq!(curve.instantaneous[0], 0.0);
        assert!((curve.final_regret() - 0.5).abs() < 1e-15);
    }
}
