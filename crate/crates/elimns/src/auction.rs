//! Second-price auctions with a reserve price over a finite price grid.
//!
//! The seller announces a reserve `r`; the highest bidder wins if some bid
//! clears `r` and pays the larger of the second-highest bid and `r`. Placing
//! the candidate reserves on a grid turns one round into a reward vector
//! (one payment per grid price), and announcing grid price `r_k` lets the
//! seller reconstruct the payments at every price at or above `r_k` from the
//! bids that cleared it — the one-sided feedback consumed by the engine in
//! [`crate::bandit`]. For finite-support value distributions the expected
//! revenue per reserve is computed exactly by enumeration.

use serde::{Deserialize, Serialize};

use crate::bandit::{Arm, RewardSuffix};
use crate::{Error, Result};

/// Atom probabilities must sum to 1 within this tolerance.
pub const NORMALIZATION_TOLERANCE: f64 = 1e-12;

// ---------------------------------------------------------------------------
// Value vectors and price grids
// ---------------------------------------------------------------------------

/// One round's realized bidder values, each in `[0, 1]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "Vec<f64>", into = "Vec<f64>")]
pub struct ValueVector(Vec<f64>);

impl ValueVector {
    pub fn new(values: Vec<f64>) -> Result<Self> {
        if values.is_empty() {
            return Err(Error::EmptyValues);
        }
        for &v in &values {
            if !(0.0..=1.0).contains(&v) {
                return Err(Error::ValueOutOfRange { value: v });
            }
        }
        Ok(ValueVector(values))
    }

    pub fn values(&self) -> &[f64] {
        &self.0
    }

    pub fn num_bidders(&self) -> usize {
        self.0.len()
    }
}

impl TryFrom<Vec<f64>> for ValueVector {
    type Error = Error;
    fn try_from(values: Vec<f64>) -> Result<Self> {
        ValueVector::new(values)
    }
}

impl From<ValueVector> for Vec<f64> {
    fn from(v: ValueVector) -> Vec<f64> {
        v.0
    }
}

/// Strictly increasing candidate reserve prices in `[0, 1]`. Grid index `k`
/// (0-based) corresponds to arm `k + 1`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "Vec<f64>", into = "Vec<f64>")]
pub struct PriceGrid(Vec<f64>);

impl PriceGrid {
    pub fn new(prices: Vec<f64>) -> Result<Self> {
        if prices.is_empty() {
            return Err(Error::EmptyGrid);
        }
        let in_range = prices.iter().all(|p| (0.0..=1.0).contains(p));
        let increasing = prices.windows(2).all(|w| w[0] < w[1]);
        if !in_range || !increasing {
            return Err(Error::BadGrid);
        }
        Ok(PriceGrid(prices))
    }

    /// `points` evenly spaced prices spanning `[0, 1]`.
    pub fn uniform(points: usize) -> Result<Self> {
        if points < 2 {
            return Err(Error::BadGrid);
        }
        let last = (points - 1) as f64;
        PriceGrid::new((0..points).map(|k| k as f64 / last).collect())
    }

    pub fn prices(&self) -> &[f64] {
        &self.0
    }

    /// Number of prices, i.e. the arm count `K` of the induced bandit.
    pub fn num_arms(&self) -> usize {
        self.0.len()
    }

    pub fn price_of(&self, arm: Arm) -> Result<f64> {
        self.0
            .get(arm.index0())
            .copied()
            .ok_or(Error::ArmOutOfRange {
                arm: arm.get(),
                num_arms: self.0.len(),
            })
    }
}

impl TryFrom<Vec<f64>> for PriceGrid {
    type Error = Error;
    fn try_from(prices: Vec<f64>) -> Result<Self> {
        PriceGrid::new(prices)
    }
}

impl From<PriceGrid> for Vec<f64> {
    fn from(g: PriceGrid) -> Vec<f64> {
        g.0
    }
}

/// The grid `{k/⌈√T⌉ : k = 0, …, ⌈√T⌉}` matched to horizon `T`, giving
/// `⌈√T⌉ + 1` candidate reserves. A reserve one grid step below the best
/// real-valued reserve loses at most the step size per round (payments drop
/// at most point-for-point as the reserve drops), so this grid's resolution
/// matches the per-arm estimation error over `T` rounds.
pub fn discretize_prices(horizon: usize) -> Result<PriceGrid> {
    if horizon == 0 {
        return Err(Error::ZeroHorizon);
    }
    let root = (1..)
        .find(|m| m * m >= horizon)
        .expect("horizon fits usize");
    let denom = root as f64;
    PriceGrid::new((0..=root).map(|k| k as f64 / denom).collect())
}

// ---------------------------------------------------------------------------
// Payments
// ---------------------------------------------------------------------------

/// Payment collected from `bids` under reserve `r`: 0 when no bid clears the
/// reserve, otherwise `max(second-highest bid, r)`. With a single bid the
/// second-highest is taken as 0, so a clearing lone bid pays the reserve.
fn payment_from_bids(reserve: f64, bids: &[f64]) -> f64 {
    let mut top = f64::NEG_INFINITY;
    let mut second = 0.0f64;
    for &b in bids {
        if b > top {
            second = if top.is_finite() { top } else { 0.0 };
            top = b;
        } else if b > second {
            second = b;
        }
    }
    if top < reserve {
        0.0
    } else {
        second.max(reserve)
    }
}

/// Second-price payment for one realized value vector; see
/// [`payment_from_bids`] for the rule.
pub fn second_price_payment(reserve: f64, values: &ValueVector) -> f64 {
    payment_from_bids(reserve, values.values())
}

/// The payment at every grid price for one realized value vector.
pub fn reward_vector(values: &ValueVector, grid: &PriceGrid) -> Vec<f64> {
    grid.prices()
        .iter()
        .map(|&r| second_price_payment(r, values))
        .collect()
}

/// Payments at every grid price at or above the announced arm's, computed
/// only from the bids that cleared the announced reserve. Equals the
/// corresponding suffix of [`reward_vector`] exactly: a bid below the
/// announced reserve can neither win nor set the price at any higher
/// reserve, so censoring it changes nothing.
pub fn observed_suffix(
    values: &ValueVector,
    grid: &PriceGrid,
    announced: Arm,
) -> Result<RewardSuffix> {
    let announced_price = grid.price_of(announced)?;
    let cleared: Vec<f64> = values
        .values()
        .iter()
        .copied()
        .filter(|&b| b >= announced_price)
        .collect();
    let payments: Vec<f64> = grid.prices()[announced.index0()..]
        .iter()
        .map(|&r| payment_from_bids(r, &cleared))
        .collect();
    RewardSuffix::new(announced, payments)
}

// ---------------------------------------------------------------------------
// Finite-support value distributions
// ---------------------------------------------------------------------------

/// A finite-support joint distribution over bidder value vectors, with exact
/// per-reserve expected revenue by enumeration.
///
/// Serializes as `{"n": bidders, "atoms": [{"values": [...], "p": ...}]}`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "DistributionRepr", into = "DistributionRepr")]
pub struct FiniteValueDistribution {
    atoms: Vec<(ValueVector, f64)>,
}

impl FiniteValueDistribution {
    pub fn new(atoms: Vec<(ValueVector, f64)>) -> Result<Self> {
        if atoms.is_empty() {
            return Err(Error::EmptyDistribution);
        }
        let n = atoms[0].0.num_bidders();
        let mut total = 0.0;
        for (values, p) in &atoms {
            if values.num_bidders() != n {
                return Err(Error::MixedBidderCounts {
                    expected: n,
                    found: values.num_bidders(),
                });
            }
            if !(p.is_finite() && *p > 0.0) {
                return Err(Error::BadAtomProbability { probability: *p });
            }
            total += p;
        }
        if (total - 1.0).abs() > NORMALIZATION_TOLERANCE {
            return Err(Error::UnnormalizedDistribution { total });
        }
        Ok(FiniteValueDistribution { atoms })
    }

    /// Point mass on a single value vector.
    pub fn point_mass(values: ValueVector) -> Self {
        FiniteValueDistribution {
            atoms: vec![(values, 1.0)],
        }
    }

    pub fn atoms(&self) -> &[(ValueVector, f64)] {
        &self.atoms
    }

    pub fn num_bidders(&self) -> usize {
        self.atoms[0].0.num_bidders()
    }

    /// Atoms merged by identical value vectors and sorted, so that two
    /// constructions of the same distribution compare equal.
    pub fn canonical_atoms(&self) -> Vec<(Vec<f64>, f64)> {
        let mut merged: Vec<(Vec<f64>, f64)> = Vec::new();
        for (values, p) in &self.atoms {
            match merged.iter_mut().find(|(v, _)| v == values.values()) {
                Some((_, total)) => *total += p,
                None => merged.push((values.values().to_vec(), *p)),
            }
        }
        merged.sort_by(|(a, _), (b, _)| a.partial_cmp(b).expect("values are finite"));
        merged
    }

    /// Whether two distributions have identical canonical atoms (exact
    /// probability match). Used to count schedule switch points.
    pub fn same_distribution(&self, other: &Self) -> bool {
        self.canonical_atoms() == other.canonical_atoms()
    }

    /// The mixture `(1−w)·first + w·second` over the union support.
    pub fn mixture(first: &Self, second: &Self, weight_on_second: f64) -> Result<Self> {
        if !(0.0..=1.0).contains(&weight_on_second) {
            return Err(Error::BadMixtureWeight {
                weight: weight_on_second,
            });
        }
        if first.num_bidders() != second.num_bidders() {
            return Err(Error::MixedBidderCounts {
                expected: first.num_bidders(),
                found: second.num_bidders(),
            });
        }
        let w = weight_on_second;
        let mut atoms: Vec<(Vec<f64>, f64)> = first
            .canonical_atoms()
            .into_iter()
            .map(|(v, p)| (v, (1.0 - w) * p))
            .collect();
        for (values, p) in second.canonical_atoms() {
            match atoms.iter_mut().find(|(v, _)| *v == values) {
                Some((_, total)) => *total += w * p,
                None => atoms.push((values, w * p)),
            }
        }
        FiniteValueDistribution::new(
            atoms
                .into_iter()
                .filter(|(_, p)| *p > 0.0)
                .map(|(v, p)| Ok((ValueVector::new(v)?, p)))
                .collect::<Result<Vec<_>>>()?,
        )
    }

    /// Exact expected payment under reserve `r`.
    pub fn expected_revenue(&self, reserve: f64) -> f64 {
        self.atoms
            .iter()
            .map(|(values, p)| p * second_price_payment(reserve, values))
            .sum()
    }

    /// Exact expected payment at every grid price.
    pub fn mean_vector(&self, grid: &PriceGrid) -> Vec<f64> {
        grid.prices()
            .iter()
            .map(|&r| self.expected_revenue(r))
            .collect()
    }

    /// The revenue-maximizing grid price; ties go to the lowest arm.
    pub fn best_reserve(&self, grid: &PriceGrid) -> (Arm, f64) {
        let means = self.mean_vector(grid);
        best_arm(&means)
    }
}

/// Index of the maximal entry (ties to the lowest), as a 1-based arm.
pub fn best_arm(means: &[f64]) -> (Arm, f64) {
    assert!(!means.is_empty(), "no arms to choose from");
    let mut best = 0;
    for (idx, &m) in means.iter().enumerate() {
        if m > means[best] {
            best = idx;
        }
    }
    (Arm::new(best + 1).expect("1-based"), means[best])
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct DistributionRepr {
    n: usize,
    atoms: Vec<AtomRepr>,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct AtomRepr {
    values: Vec<f64>,
    p: f64,
}

impl TryFrom<DistributionRepr> for FiniteValueDistribution {
    type Error = Error;
    fn try_from(repr: DistributionRepr) -> Result<Self> {
        let atoms = repr
            .atoms
            .into_iter()
            .map(|a| Ok((ValueVector::new(a.values)?, a.p)))
            .collect::<Result<Vec<_>>>()?;
        let dist = FiniteValueDistribution::new(atoms)?;
        if dist.num_bidders() != repr.n {
            return Err(Error::MixedBidderCounts {
                expected: repr.n,
                found: dist.num_bidders(),
            });
        }
        Ok(dist)
    }
}

impl From<FiniteValueDistribution> for DistributionRepr {
    fn from(dist: FiniteValueDistribution) -> DistributionRepr {
        DistributionRepr {
            n: dist.num_bidders(),
            atoms: dist
                .atoms
                .into_iter()
                .map(|(values, p)| AtomRepr {
                    values: values.into(),
                    p,
                })
                .collect(),
        }
    }
}
