//! Drives one policy against one schedule round by round, and aggregates
//! replications and horizon sweeps.
//!
//! A run derives two independent random streams from `(base_seed,
//! replication)` — environment and algorithm — so every policy variant faces
//! byte-identical reward draws under the same key, and results are exactly
//! reproducible across processes and thread counts.

use std::time::Instant;

use rayon::prelude::*;
use serde::Serialize;

use super::config::{AlgorithmSpec, ExperimentConfig, SCHEMA_VERSION};
use super::rng::{derive_stream, StreamPurpose};
use crate::analysis::{self, RegretCurve, RoundRecord, RunTrace};
use crate::auction::best_arm;
use crate::bandit::{Arm, ElimNs, UpdateEvents};
use crate::{Error, Result};

/// Variation budget used for the partition statistic reported with each run.
pub const PARTITION_BUDGET: f64 = 0.5;

/// One elimination performed during a run.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EliminationEvent {
    pub round: usize,
    pub arm: Arm,
    pub gap: f64,
}

/// Summary statistics of a single run, serialized as `summary.json`.
#[derive(Debug, Clone, Serialize)]
pub struct RunResult {
    pub schema_version: u32,
    pub config_digest: String,
    pub base_seed: u64,
    pub replication: u64,
    pub horizon: usize,
    pub num_arms: usize,
    pub algorithm: String,
    pub final_regret: f64,
    pub restart_count: usize,
    pub restart_rounds: Vec<usize>,
    pub epochs: usize,
    pub eliminations: Vec<EliminationEvent>,
    pub switch_count: usize,
    pub auction_variation: Option<f64>,
    pub bandit_variation: f64,
    /// Interval count of the variation-balanced partition of the true means.
    pub gamma: usize,
    pub invariant_checks: u64,
    pub environment_warnings: Vec<String>,
    /// Wall-clock time; excluded from serialization to keep outputs
    /// byte-deterministic.
    #[serde(skip)]
    pub wall_time_ms: u128,
}

/// Everything one run produces: the summary, the per-round trace, and the
/// regret curve aligned with it.
#[derive(Debug, Clone)]
pub struct RunArtifacts {
    pub result: RunResult,
    pub trace: RunTrace,
    pub regret: RegretCurve,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum EnginePolicy {
    Adaptive,
    NoRestart,
    OracleRestart,
}

/// Execute one replication of the configured experiment.
pub fn run_one(config: &ExperimentConfig, replication: u64) -> Result<RunArtifacts> {
    config.validate()?;
    let started = Instant::now();
    let horizon = config.horizon;
    let mut env_rng = derive_stream(config.base_seed, replication, StreamPurpose::Environment);
    let mut algo_rng = derive_stream(config.base_seed, replication, StreamPurpose::Algorithm);
    let schedule = config.build_environment(&mut env_rng)?;
    let audit = schedule.audit();
    let num_arms = schedule.num_arms();
    let means = schedule.mean_matrix();
    let best_means: Vec<f64> = means
        .iter()
        .map(|row| row.iter().copied().fold(f64::NEG_INFINITY, f64::max))
        .collect();

    let mut rounds: Vec<RoundRecord> = Vec::with_capacity(horizon);
    let mut draws = config.record_draws.then(|| Vec::with_capacity(horizon));
    let mut instantaneous = Vec::with_capacity(horizon);
    let mut cumulative = Vec::with_capacity(horizon);
    let mut total_regret = 0.0f64;
    let mut restart_rounds = Vec::new();
    let mut eliminations = Vec::new();
    let mut epochs = 1usize;
    let mut invariant_checks = 0u64;

    let mut push_round = |round: usize,
                          arm: Arm,
                          in_exploration: bool,
                          d_max: Option<f64>,
                          epoch: usize,
                          restarted: bool,
                          elimination_count: usize,
                          reward_row: Option<&Vec<f64>>| {
        let inst = best_means[round - 1] - means[round - 1][arm.index0()];
        total_regret += inst;
        instantaneous.push(inst);
        cumulative.push(total_regret);
        rounds.push(RoundRecord {
            round,
            arm,
            in_exploration,
            d_max,
            epoch,
            restarted,
            eliminations: elimination_count,
        });
        if let (Some(draws), Some(row)) = (draws.as_mut(), reward_row) {
            draws.push(row.clone());
        }
    };

    match &config.algorithm {
        AlgorithmSpec::BaselineFixedBest(_) => {
            let (arm, _) = best_arm(&means[0]);
            for t in 1..=horizon {
                let draw = schedule.draw(t, &mut env_rng)?;
                push_round(t, arm, false, None, 1, false, 0, Some(&draw.rewards));
            }
        }
        AlgorithmSpec::ElimNs(spec)
        | AlgorithmSpec::BaselineNoRestart(spec)
        | AlgorithmSpec::BaselineOracleRestart(spec) => {
            let policy = match &config.algorithm {
                AlgorithmSpec::ElimNs(_) => EnginePolicy::Adaptive,
                AlgorithmSpec::BaselineNoRestart(_) => EnginePolicy::NoRestart,
                _ => EnginePolicy::OracleRestart,
            };
            let mut engine = ElimNs::new(spec.algorithm_config(horizon, num_arms))?;
            for t in 1..=horizon {
                let mut restarted = false;
                if policy == EnginePolicy::OracleRestart
                    && audit.change_rounds.binary_search(&t).is_ok()
                {
                    engine.force_restart();
                    restart_rounds.push(t);
                    restarted = true;
                }
                let epoch_at_play = engine.epoch();
                let draw = schedule.draw(t, &mut env_rng)?;
                let (decision, events) = match policy {
                    EnginePolicy::Adaptive => engine.advance_round(&mut algo_rng, |d| {
                        schedule
                            .observed(&draw, d.arm)
                            .expect("played arms are within the schedule")
                    })?,
                    EnginePolicy::NoRestart | EnginePolicy::OracleRestart => {
                        engine.sample_exploration_phases(&mut algo_rng);
                        let decision = engine.choose_action();
                        let suffix = schedule.observed(&draw, decision.arm)?;
                        engine.record_observations(t, &suffix)?;
                        let records = engine.elimination_step();
                        let events = UpdateEvents {
                            eliminations: records,
                            restarted: false,
                            new_epoch_start: None,
                        };
                        (decision, events)
                    }
                };
                if events.restarted {
                    restart_rounds.push(t);
                    restarted = true;
                }
                for record in &events.eliminations {
                    eliminations.push(EliminationEvent {
                        round: t,
                        arm: record.arm,
                        gap: record.gap,
                    });
                }
                push_round(
                    t,
                    decision.arm,
                    decision.in_exploration,
                    decision.d_max,
                    epoch_at_play,
                    restarted,
                    events.eliminations.len(),
                    Some(&draw.rewards),
                );
            }
            epochs = engine.epoch();
            invariant_checks = engine.invariant_checks();
        }
    }

    let gamma = analysis::interval_partition(&means, PARTITION_BUDGET)?.gamma();
    let regret = RegretCurve {
        instantaneous,
        cumulative,
    };
    let result = RunResult {
        schema_version: SCHEMA_VERSION,
        config_digest: config.digest(),
        base_seed: config.base_seed,
        replication,
        horizon,
        num_arms,
        algorithm: config.algorithm.tag().to_string(),
        final_regret: regret.final_regret(),
        restart_count: restart_rounds.len(),
        restart_rounds,
        epochs,
        eliminations,
        switch_count: audit.switch_count,
        auction_variation: audit.auction_variation,
        bandit_variation: audit.bandit_variation,
        gamma,
        invariant_checks,
        environment_warnings: audit.warnings,
        wall_time_ms: started.elapsed().as_millis(),
    };
    let trace = RunTrace {
        rounds,
        means,
        draws,
    };
    Ok(RunArtifacts {
        result,
        trace,
        regret,
    })
}

/// Aggregate statistics over replications `0..replications`, serialized as
/// `batch_summary.json`.
#[derive(Debug, Clone, Serialize)]
pub struct BatchResult {
    pub schema_version: u32,
    pub config_digest: String,
    pub replications: u64,
    pub mean_final_regret: f64,
    /// Sample standard deviation; absent for a single replication.
    pub sd_final_regret: Option<f64>,
    pub mean_restart_count: f64,
    pub zero_restart_replications: u64,
    pub runs: Vec<RunResult>,
}

/// Run replications `0..replications` (in parallel) and aggregate them.
/// Results are ordered by replication index regardless of thread schedule.
pub fn run_batch(config: &ExperimentConfig, replications: u64) -> Result<BatchResult> {
    if replications == 0 {
        return Err(Error::InvalidExperiment(
            "a batch needs at least one replication".into(),
        ));
    }
    config.validate()?;
    let runs: Vec<RunResult> = (0..replications)
        .into_par_iter()
        .map(|replication| run_one(config, replication).map(|artifacts| artifacts.result))
        .collect::<Result<Vec<_>>>()?;
    let n = runs.len() as f64;
    let mean_final_regret = runs.iter().map(|r| r.final_regret).sum::<f64>() / n;
    let sd_final_regret = (runs.len() > 1).then(|| {
        (runs
            .iter()
            .map(|r| (r.final_regret - mean_final_regret).powi(2))
            .sum::<f64>()
            / (n - 1.0))
            .sqrt()
    });
    let mean_restart_count = runs.iter().map(|r| r.restart_count as f64).sum::<f64>() / n;
    let zero_restart_replications = runs.iter().filter(|r| r.restart_count == 0).count() as u64;
    Ok(BatchResult {
        schema_version: SCHEMA_VERSION,
        config_digest: config.digest(),
        replications,
        mean_final_regret,
        sd_final_regret,
        mean_restart_count,
        zero_restart_replications,
        runs,
    })
}

/// One horizon's aggregate in a scaling sweep.
#[derive(Debug, Clone, Serialize)]
pub struct ScalingPoint {
    pub horizon: usize,
    pub mean_final_regret: f64,
    pub sd_final_regret: Option<f64>,
}

/// A horizon sweep with its fitted log–log slope, serialized as
/// `scaling.json`.
#[derive(Debug, Clone, Serialize)]
pub struct ScalingStudy {
    pub schema_version: u32,
    pub config_digest: String,
    pub algorithm: String,
    pub replications: u64,
    pub points: Vec<ScalingPoint>,
    /// Least-squares slope of `ln(mean regret)` against `ln(horizon)`;
    /// `None` when any mean regret is non-positive.
    pub log_log_slope: Option<f64>,
}

/// Re-run the experiment at each horizon (strictly increasing, at least
/// three) and fit the growth exponent of mean final regret.
pub fn scaling_study(
    config: &ExperimentConfig,
    horizons: &[usize],
    replications: u64,
) -> Result<ScalingStudy> {
    if horizons.len() < 3 || !horizons.windows(2).all(|w| w[0] < w[1]) {
        return Err(Error::InvalidExperiment(
            "a scaling study needs at least three strictly increasing horizons".into(),
        ));
    }
    let mut points = Vec::with_capacity(horizons.len());
    for &horizon in horizons {
        let scaled = config.with_horizon(horizon)?;
        let batch = run_batch(&scaled, replications)?;
        points.push(ScalingPoint {
            horizon,
            mean_final_regret: batch.mean_final_regret,
            sd_final_regret: batch.sd_final_regret,
        });
    }
    let log_log_slope = fit_log_log_slope(&points);
    Ok(ScalingStudy {
        schema_version: SCHEMA_VERSION,
        config_digest: config.digest(),
        algorithm: config.algorithm.tag().to_string(),
        replications,
        points,
        log_log_slope,
    })
}

/// Least-squares slope of `ln(mean regret)` on `ln(horizon)`.
pub fn fit_log_log_slope(points: &[ScalingPoint]) -> Option<f64> {
    if points.len() < 2 || points.iter().any(|p| p.mean_final_regret <= 0.0) {
        return None;
    }
    let xs: Vec<f64> = points.iter().map(|p| (p.horizon as f64).ln()).collect();
    let ys: Vec<f64> = points.iter().map(|p| p.mean_final_regret.ln()).collect();
    let n = xs.len() as f64;
    let x_mean = xs.iter().sum::<f64>() / n;
    let y_mean = ys.iter().sum::<f64>() / n;
    let covariance: f64 = xs
        .iter()
        .zip(&ys)
        .map(|(x, y)| (x - x_mean) * (y - y_mean))
        .sum();
    let variance: f64 = xs.iter().map(|x| (x - x_mean).powi(2)).sum();
    Some(covariance / variance)
}
