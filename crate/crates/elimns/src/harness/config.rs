//! Experiment configuration: a single JSON document that pins everything a
//! run depends on — horizon, seed, environment recipe, algorithm variant and
//! constants — plus a content digest so outputs can be traced back to the
//! exact configuration that produced them.

use rand::Rng;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::auction::{discretize_prices, FiniteValueDistribution, PriceGrid};
use crate::bandit::{AlgorithmConfig, LogTermMode, SigmaScanMode};
use crate::env::{self, EnvironmentSchedule, RewardLaw};
use crate::{Error, Result};

/// Version stamp carried by configurations and every serialized output.
pub const SCHEMA_VERSION: u32 = 1;

// ---------------------------------------------------------------------------
// Environment specifications
// ---------------------------------------------------------------------------

/// One piece of a piecewise-constant auction timeline.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AuctionSegmentSpec {
    pub length: usize,
    pub distribution: FiniteValueDistribution,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SwitchingSpec {
    pub segments: Vec<AuctionSegmentSpec>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DriftingSpec {
    pub start: FiniteValueDistribution,
    pub end: FiniteValueDistribution,
    pub variation_budget: f64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LowerBoundSwitchingSpec {
    pub num_segments: usize,
    #[serde(default = "default_c_eps")]
    pub c_eps: f64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LowerBoundDynamicSpec {
    pub variation_budget: f64,
    #[serde(default = "default_c_eps")]
    pub c_eps: f64,
}

/// One piece of a piecewise-constant direct-bandit timeline.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BanditSegmentSpec {
    pub length: usize,
    pub means: Vec<f64>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DirectBanditSpec {
    pub num_arms: usize,
    pub reward_law: RewardLaw,
    pub segments: Vec<BanditSegmentSpec>,
}

fn default_c_eps() -> f64 {
    0.25
}

/// Which environment family a run draws its schedule from.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EnvironmentSpec {
    /// Explicit piecewise-constant auction timeline.
    Switching(SwitchingSpec),
    /// Budgeted mixture drift between two auction distributions.
    Drifting(DriftingSpec),
    /// Randomized hard switching family (seeded per replication).
    LowerBoundSwitching(LowerBoundSwitchingSpec),
    /// Randomized hard drifting family (seeded per replication).
    LowerBoundDynamic(LowerBoundDynamicSpec),
    /// Direct bandit means, bypassing the auction reduction.
    DirectBandit(DirectBanditSpec),
}

impl EnvironmentSpec {
    pub fn is_auction(&self) -> bool {
        !matches!(self, EnvironmentSpec::DirectBandit(_))
    }
}

// ---------------------------------------------------------------------------
// Algorithm specifications
// ---------------------------------------------------------------------------

/// Engine constants; every field has a desk-scale default so configs only
/// name what they change.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EngineSpec {
    #[serde(default = "default_c1")]
    pub c1: f64,
    #[serde(default = "default_c2")]
    pub c2: f64,
    #[serde(default = "default_restart_threshold")]
    pub restart_threshold: f64,
    #[serde(default = "default_log_term_mode")]
    pub log_term_mode: LogTermMode,
    #[serde(default = "default_sigma_scan_mode")]
    pub sigma_scan_mode: SigmaScanMode,
    #[serde(default)]
    pub enforce_calibrated_constants: bool,
}

fn default_c1() -> f64 {
    4.0
}

fn default_c2() -> f64 {
    4.0
}

fn default_restart_threshold() -> f64 {
    0.75
}

fn default_log_term_mode() -> LogTermMode {
    LogTermMode::Demo
}

fn default_sigma_scan_mode() -> SigmaScanMode {
    SigmaScanMode::Geometric
}

impl Default for EngineSpec {
    fn default() -> Self {
        EngineSpec {
            c1: default_c1(),
            c2: default_c2(),
            restart_threshold: default_restart_threshold(),
            log_term_mode: default_log_term_mode(),
            sigma_scan_mode: default_sigma_scan_mode(),
            enforce_calibrated_constants: false,
        }
    }
}

impl EngineSpec {
    pub fn algorithm_config(&self, horizon: usize, num_arms: usize) -> AlgorithmConfig {
        AlgorithmConfig {
            horizon,
            num_arms,
            c1: self.c1,
            c2: self.c2,
            restart_threshold: self.restart_threshold,
            log_term_mode: self.log_term_mode,
            sigma_scan_mode: self.sigma_scan_mode,
            enforce_calibrated_constants: self.enforce_calibrated_constants,
        }
    }
}

/// Marker for the clairvoyant fixed-arm baseline (no parameters).
#[derive(Debug, Clone, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FixedBestSpec {}

/// Which policy a run executes.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AlgorithmSpec {
    /// The full adaptive engine: exploration, elimination, and restarts.
    ElimNs(EngineSpec),
    /// Ablation: identical engine with the restart test disabled.
    BaselineNoRestart(EngineSpec),
    /// Ablation: restart test replaced by restarts at the true change rounds.
    BaselineOracleRestart(EngineSpec),
    /// Clairvoyant constant policy: the best arm of the first round, forever.
    BaselineFixedBest(FixedBestSpec),
}

impl AlgorithmSpec {
    pub fn tag(&self) -> &'static str {
        match self {
            AlgorithmSpec::ElimNs(_) => "elim_ns",
            AlgorithmSpec::BaselineNoRestart(_) => "baseline_no_restart",
            AlgorithmSpec::BaselineOracleRestart(_) => "baseline_oracle_restart",
            AlgorithmSpec::BaselineFixedBest(_) => "baseline_fixed_best",
        }
    }

    pub fn engine_spec(&self) -> Option<&EngineSpec> {
        match self {
            AlgorithmSpec::ElimNs(spec)
            | AlgorithmSpec::BaselineNoRestart(spec)
            | AlgorithmSpec::BaselineOracleRestart(spec) => Some(spec),
            AlgorithmSpec::BaselineFixedBest(_) => None,
        }
    }
}

// ---------------------------------------------------------------------------
// Experiment configuration
// ---------------------------------------------------------------------------

/// Everything a reproducible run depends on.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    #[serde(default = "default_schema_version")]
    pub schema_version: u32,
    pub horizon: usize,
    #[serde(default)]
    pub base_seed: u64,
    pub environment: EnvironmentSpec,
    pub algorithm: AlgorithmSpec,
    /// Overrides the horizon-derived price grid with `grid_points` uniform
    /// prices (auction environments only).
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub grid_points: Option<usize>,
    /// Record the full per-round reward draws in the trace (memory-heavy).
    #[serde(default)]
    pub record_draws: bool,
}

fn default_schema_version() -> u32 {
    SCHEMA_VERSION
}

impl ExperimentConfig {
    pub fn from_json(text: &str) -> Result<Self> {
        let config: ExperimentConfig = serde_json::from_str(text)?;
        config.validate()?;
        Ok(config)
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)? + "\n")
    }

    /// SHA-256 of the canonical serialization; stamped into every output.
    pub fn digest(&self) -> String {
        let canonical = serde_json::to_string(self).expect("configs serialize infallibly");
        let hash = Sha256::digest(canonical.as_bytes());
        hash.iter().map(|byte| format!("{byte:02x}")).collect()
    }

    /// The price grid this configuration induces (auction environments only).
    pub fn grid(&self) -> Result<PriceGrid> {
        if !self.environment.is_auction() {
            return Err(Error::InvalidExperiment(
                "direct bandit environments have no price grid".into(),
            ));
        }
        match self.grid_points {
            Some(points) => PriceGrid::uniform(points),
            None => discretize_prices(self.horizon),
        }
    }

    /// Arm count the algorithm will face.
    pub fn resolved_num_arms(&self) -> Result<usize> {
        match &self.environment {
            EnvironmentSpec::DirectBandit(spec) => Ok(spec.num_arms),
            _ => Ok(self.grid()?.num_arms()),
        }
    }

    pub fn validate(&self) -> Result<()> {
        let fail = |reason: String| Err(Error::InvalidExperiment(reason));
        if self.schema_version != SCHEMA_VERSION {
            return fail(format!(
                "schema_version {} is not the supported version {SCHEMA_VERSION}",
                self.schema_version
            ));
        }
        if self.horizon == 0 {
            return Err(Error::ZeroHorizon);
        }
        if let Some(points) = self.grid_points {
            if !self.environment.is_auction() {
                return fail("grid_points is only valid for auction environments".into());
            }
            if points < 2 {
                return fail(format!("grid_points {points} must be at least 2"));
            }
        }
        match &self.environment {
            EnvironmentSpec::Switching(spec) => {
                self.check_segment_lengths(spec.segments.iter().map(|s| s.length))?;
            }
            EnvironmentSpec::Drifting(spec) => {
                if !(spec.variation_budget >= 0.0 && spec.variation_budget.is_finite()) {
                    return fail("variation_budget must be non-negative and finite".into());
                }
            }
            EnvironmentSpec::LowerBoundSwitching(spec) => {
                if spec.num_segments == 0 || spec.num_segments > self.horizon {
                    return fail(format!(
                        "num_segments {} must lie in [1, horizon]",
                        spec.num_segments
                    ));
                }
                if !(spec.c_eps > 0.0 && spec.c_eps.is_finite()) {
                    return fail("c_eps must be positive and finite".into());
                }
            }
            EnvironmentSpec::LowerBoundDynamic(spec) => {
                if !(spec.variation_budget > 0.0 && spec.variation_budget.is_finite()) {
                    return fail("variation_budget must be positive and finite".into());
                }
                if !(spec.c_eps > 0.0 && spec.c_eps.is_finite()) {
                    return fail("c_eps must be positive and finite".into());
                }
            }
            EnvironmentSpec::DirectBandit(spec) => {
                if spec.num_arms == 0 {
                    return fail("num_arms must be at least 1".into());
                }
                self.check_segment_lengths(spec.segments.iter().map(|s| s.length))?;
                for segment in &spec.segments {
                    if segment.means.len() != spec.num_arms {
                        return fail(format!(
                            "segment has {} means, expected {}",
                            segment.means.len(),
                            spec.num_arms
                        ));
                    }
                    if segment.means.iter().any(|m| !(0.0..=1.0).contains(m)) {
                        return fail("bandit means must lie in [0, 1]".into());
                    }
                }
            }
        }
        if let Some(engine) = self.algorithm.engine_spec() {
            engine
                .algorithm_config(self.horizon, self.resolved_num_arms()?)
                .validate()?;
        }
        Ok(())
    }

    fn check_segment_lengths(&self, lengths: impl Iterator<Item = usize>) -> Result<()> {
        let mut total = 0usize;
        let mut count = 0usize;
        for length in lengths {
            if length == 0 {
                return Err(Error::InvalidExperiment(
                    "segment lengths must be at least 1".into(),
                ));
            }
            total += length;
            count += 1;
        }
        if count == 0 {
            return Err(Error::InvalidExperiment(
                "the timeline needs at least one segment".into(),
            ));
        }
        if total != self.horizon {
            return Err(Error::InvalidExperiment(format!(
                "segment lengths sum to {total}, horizon is {}",
                self.horizon
            )));
        }
        Ok(())
    }

    /// Instantiate the schedule. Randomized families consume `rng`; explicit
    /// timelines ignore it.
    pub fn build_environment<R: Rng + ?Sized>(&self, rng: &mut R) -> Result<EnvironmentSchedule> {
        self.validate()?;
        match &self.environment {
            EnvironmentSpec::Switching(spec) => env::build_switching(
                spec.segments
                    .iter()
                    .map(|s| (s.length, s.distribution.clone()))
                    .collect(),
                self.grid()?,
            ),
            EnvironmentSpec::Drifting(spec) => env::build_drifting(
                spec.start.clone(),
                spec.end.clone(),
                self.horizon,
                spec.variation_budget,
                self.grid()?,
            ),
            EnvironmentSpec::LowerBoundSwitching(spec) => env::build_lower_bound_switching(
                spec.num_segments,
                self.horizon,
                spec.c_eps,
                self.grid()?,
                rng,
            ),
            EnvironmentSpec::LowerBoundDynamic(spec) => env::build_lower_bound_dynamic(
                spec.variation_budget,
                self.horizon,
                spec.c_eps,
                self.grid()?,
                rng,
            ),
            EnvironmentSpec::DirectBandit(spec) => env::build_piecewise_bandit(
                spec.reward_law,
                spec.segments
                    .iter()
                    .map(|s| (s.length, s.means.clone()))
                    .collect(),
            ),
        }
    }

    /// The same experiment at a different horizon: explicit timelines are
    /// rescaled proportionally (each boundary rounded, so segment order and
    /// count survive); parameterized families re-derive their shape from the
    /// new horizon on their own.
    pub fn with_horizon(&self, horizon: usize) -> Result<Self> {
        if horizon == 0 {
            return Err(Error::ZeroHorizon);
        }
        let mut next = self.clone();
        next.horizon = horizon;
        match &mut next.environment {
            EnvironmentSpec::Switching(spec) => {
                let lengths = rescale_lengths(
                    &spec.segments.iter().map(|s| s.length).collect::<Vec<_>>(),
                    horizon,
                )?;
                for (segment, length) in spec.segments.iter_mut().zip(lengths) {
                    segment.length = length;
                }
            }
            EnvironmentSpec::DirectBandit(spec) => {
                let lengths = rescale_lengths(
                    &spec.segments.iter().map(|s| s.length).collect::<Vec<_>>(),
                    horizon,
                )?;
                for (segment, length) in spec.segments.iter_mut().zip(lengths) {
                    segment.length = length;
                }
            }
            _ => {}
        }
        next.validate()?;
        Ok(next)
    }
}

/// Rescale segment lengths to a new total by rounding each cumulative
/// boundary; fails if two boundaries collide (a segment would vanish).
fn rescale_lengths(lengths: &[usize], horizon: usize) -> Result<Vec<usize>> {
    let total: usize = lengths.iter().sum();
    let mut out = Vec::with_capacity(lengths.len());
    let mut cumulative = 0usize;
    let mut previous = 0usize;
    for &length in lengths {
        cumulative += length;
        let boundary =
            ((cumulative as u128 * horizon as u128 + total as u128 / 2) / total as u128) as usize;
        if boundary <= previous {
            return Err(Error::InvalidExperiment(format!(
                "horizon {horizon} is too small to keep all {} segments non-empty",
                lengths.len()
            )));
        }
        out.push(boundary - previous);
        previous = boundary;
    }
    debug_assert_eq!(previous, horizon);
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::env::hard_pair_distribution;

    fn switching_config() -> ExperimentConfig {
        ExperimentConfig {
            schema_version: SCHEMA_VERSION,
            horizon: 1000,
            base_seed: 42,
            environment: EnvironmentSpec::Switching(SwitchingSpec {
                segments: vec![
                    AuctionSegmentSpec {
                        length: 400,
                        distribution: hard_pair_distribution(0.1).unwrap(),
                    },
                    AuctionSegmentSpec {
                        length: 600,
                        distribution: hard_pair_distribution(-0.1).unwrap(),
                    },
                ],
            }),
            algorithm: AlgorithmSpec::ElimNs(EngineSpec::default()),
            grid_points: Some(2),
            record_draws: false,
        }
    }

    #[test]
    fn minimal_json_fills_every_default() {
        let text = r#"{
            "horizon": 100,
            "environment": {"direct_bandit": {
                "num_arms": 2,
                "reward_law": "bernoulli",
                "segments": [{"length": 100, "means": [0.2, 0.8]}]
            }},
            "algorithm": {"elim_ns": {}}
        }"#;
        let config = ExperimentConfig::from_json(text).unwrap();
        assert_eq!(config.schema_version, 1);
        assert_eq!(config.base_seed, 0);
        assert_eq!(config.grid_points, None);
        assert!(!config.record_draws);
        let engine = config.algorithm.engine_spec().unwrap();
        assert_eq!(engine.c1, 4.0);
        assert_eq!(engine.c2, 4.0);
        assert_eq!(engine.restart_threshold, 0.75);
        assert_eq!(engine.log_term_mode, LogTermMode::Demo);
        assert_eq!(engine.sigma_scan_mode, SigmaScanMode::Geometric);
        assert!(!engine.enforce_calibrated_constants);
        assert_eq!(config.resolved_num_arms().unwrap(), 2);
    }

    #[test]
    fn unknown_fields_are_rejected_everywhere() {
        let top = r#"{"horizon": 10, "bogus": 1,
            "environment": {"lower_bound_switching": {"num_segments": 2}},
            "algorithm": {"baseline_fixed_best": {}}}"#;
        assert!(ExperimentConfig::from_json(top).is_err());
        let nested = r#"{"horizon": 10,
            "environment": {"lower_bound_switching": {"num_segments": 2, "bogus": 1}},
            "algorithm": {"baseline_fixed_best": {}}}"#;
        assert!(ExperimentConfig::from_json(nested).is_err());
        let engine = r#"{"horizon": 10,
            "environment": {"lower_bound_switching": {"num_segments": 2}},
            "algorithm": {"elim_ns": {"c9": 1.0}}}"#;
        assert!(ExperimentConfig::from_json(engine).is_err());
    }

    #[test]
    fn digest_is_stable_across_roundtrips_and_sensitive_to_changes() {
        let config = switching_config();
        let reparsed = ExperimentConfig::from_json(&config.to_json().unwrap()).unwrap();
        assert_eq!(config.digest(), reparsed.digest());
        assert_eq!(config.digest().len(), 64);
        let mut changed = config.clone();
        changed.base_seed = 43;
        assert_ne!(config.digest(), changed.digest());
    }

    #[test]
    fn validation_catches_shape_errors() {
        let mut config = switching_config();
        config.horizon = 999;
        assert!(matches!(
            config.validate(),
            Err(Error::InvalidExperiment(_))
        ));
        let mut config = switching_config();
        config.schema_version = 2;
        assert!(config.validate().is_err());
        let mut config = switching_config();
        config.grid_points = Some(1);
        assert!(config.validate().is_err());
        let config = ExperimentConfig {
            grid_points: Some(5),
            environment: EnvironmentSpec::DirectBandit(DirectBanditSpec {
                num_arms: 1,
                reward_law: RewardLaw::Deterministic,
                segments: vec![BanditSegmentSpec {
                    length: 1000,
                    means: vec![0.5],
                }],
            }),
            ..switching_config()
        };
        assert!(config.validate().is_err());
        // Engine constants are validated against the resolved arm count.
        let mut config = switching_config();
        if let AlgorithmSpec::ElimNs(engine) = &mut config.algorithm {
            engine.c1 = -1.0;
        }
        assert!(matches!(
            config.validate(),
            Err(Error::InvalidAlgorithmConfig(_))
        ));
    }

    #[test]
    fn grid_resolution_follows_the_override() {
        let config = switching_config();
        assert_eq!(config.grid().unwrap().prices(), &[0.0, 1.0]);
        assert_eq!(config.resolved_num_arms().unwrap(), 2);
        let mut derived = switching_config();
        derived.grid_points = None;
        // √1000 rounds up to 32 → 33 grid points.
        assert_eq!(derived.grid().unwrap().num_arms(), 33);
    }

    #[test]
    fn environments_build_and_match_the_horizon() {
        let mut rng =
            crate::harness::derive_stream(1, 0, crate::harness::StreamPurpose::Environment);
        let config = switching_config();
        let schedule = config.build_environment(&mut rng).unwrap();
        assert_eq!(schedule.horizon(), 1000);
        assert_eq!(schedule.num_arms(), 2);
        assert_eq!(schedule.change_rounds(), vec![401]);
    }

    #[test]
    fn horizon_rescaling_preserves_segment_structure() {
        let config = switching_config();
        let grown = config.with_horizon(10_000).unwrap();
        if let EnvironmentSpec::Switching(spec) = &grown.environment {
            let lengths: Vec<usize> = spec.segments.iter().map(|s| s.length).collect();
            assert_eq!(lengths, vec![4000, 6000]);
        } else {
            panic!("environment family changed");
        }
        // Rounding keeps every segment alive at awkward ratios…
        let odd = config.with_horizon(7).unwrap();
        if let EnvironmentSpec::Switching(spec) = &odd.environment {
            let lengths: Vec<usize> = spec.segments.iter().map(|s| s.length).collect();
            assert_eq!(lengths.iter().sum::<usize>(), 7);
            assert!(lengths.iter().all(|&l| l >= 1));
        }
        // …but a horizon below the segment count must fail.
        assert!(config.with_horizon(1).is_err());
        // Parameterized families keep their spec untouched.
        let lb = ExperimentConfig {
            environment: EnvironmentSpec::LowerBoundSwitching(LowerBoundSwitchingSpec {
                num_segments: 4,
                c_eps: 0.25,
            }),
            ..switching_config()
        };
        let grown = lb.with_horizon(4000).unwrap();
        assert_eq!(grown.horizon, 4000);
        assert!(matches!(
            grown.environment,
            EnvironmentSpec::LowerBoundSwitching(_)
        ));
    }
}
