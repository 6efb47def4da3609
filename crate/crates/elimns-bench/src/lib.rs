//! Shared fixtures for the criterion benchmarks in `benches/`.

use elimns::auction::{FiniteValueDistribution, ValueVector};
use elimns::bandit::{AlgorithmConfig, ElimNs};
use elimns::env::{build_switching, EnvironmentSchedule};
use elimns::harness::{derive_stream, StreamPurpose};
use rand_chacha::ChaCha12Rng;

/// Two-bidder distribution with values in {1/2, 3/4} and low-value
/// probability `p_low`.
pub fn two_point_distribution(p_low: f64) -> FiniteValueDistribution {
    let p_high = 1.0 - p_low;
    let vv = |values: &[f64]| ValueVector::new(values.to_vec()).unwrap();
    FiniteValueDistribution::new(vec![
        (vv(&[0.5, 0.5]), p_low * p_low),
        (vv(&[0.5, 0.75]), p_low * p_high),
        (vv(&[0.75, 0.5]), p_high * p_low),
        (vv(&[0.75, 0.75]), p_high * p_high),
    ])
    .unwrap()
}

/// A two-segment switching schedule over `grid_points` uniform prices.
pub fn switching_fixture(horizon: usize, grid_points: usize) -> EnvironmentSchedule {
    let grid = elimns::auction::PriceGrid::uniform(grid_points).unwrap();
    build_switching(
        vec![
            (horizon / 2, two_point_distribution(0.6)),
            (horizon - horizon / 2, two_point_distribution(0.4)),
        ],
        grid,
    )
    .unwrap()
}

/// A fresh engine plus its two derived random streams.
pub fn engine_fixture(horizon: usize, num_arms: usize) -> (ElimNs, ChaCha12Rng, ChaCha12Rng) {
    let engine = ElimNs::new(AlgorithmConfig::demo(horizon, num_arms)).unwrap();
    let env_rng = derive_stream(0, 0, StreamPurpose::Environment);
    let algo_rng = derive_stream(0, 0, StreamPurpose::Algorithm);
    (engine, env_rng, algo_rng)
}
