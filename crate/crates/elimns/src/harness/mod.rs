//! Reproducible experiment harness: configuration, seeded runs, replication
//! batches, horizon sweeps, and byte-deterministic output files.
//!
//! The determinism contract: a `(config, replication)` pair fully determines
//! every byte of `trace.csv` and `summary.json`, across process restarts and
//! thread counts. Randomness flows only through streams derived by
//! [`derive_stream`]; wall-clock time is measured but never serialized.

mod config;
mod output;
mod rng;
mod runner;

pub use config::{
    AlgorithmSpec, AuctionSegmentSpec, BanditSegmentSpec, DirectBanditSpec, DriftingSpec,
    EngineSpec, EnvironmentSpec, ExperimentConfig, FixedBestSpec, LowerBoundDynamicSpec,
    LowerBoundSwitchingSpec, SwitchingSpec, SCHEMA_VERSION,
};
pub use output::{
    render_batch_json, render_scaling_csv, render_scaling_json, render_summary_json,
    render_trace_csv, write_batch, write_run, write_scaling,
};
pub use rng::{derive_stream, StreamPurpose};
pub use runner::{
    fit_log_log_slope, run_batch, run_one, scaling_study, BatchResult, EliminationEvent,
    RunArtifacts, RunResult, ScalingPoint, ScalingStudy, PARTITION_BUDGET,
};
