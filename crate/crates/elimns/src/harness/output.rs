//! Byte-deterministic rendering of run artifacts, and guarded writes.
//!
//! Output files embed the configuration digest; a write into a directory
//! holding results from a *different* configuration fails unless forced, so
//! stale results cannot silently mix with fresh ones.

use std::fs;
use std::path::{Path, PathBuf};

use super::runner::{BatchResult, RunArtifacts, RunResult, ScalingStudy};
use crate::{Error, Result};

/// Render the per-round trace. Columns: `t`, `arm`, `exploring` (0/1),
/// `d_max` (empty outside exploration), `epoch`, `restarted` (0/1),
/// `inst_regret`, `cum_regret`.
pub fn render_trace_csv(artifacts: &RunArtifacts) -> Result<String> {
    let mut writer = csv::Writer::from_writer(Vec::new());
    writer.write_record([
        "t",
        "arm",
        "exploring",
        "d_max",
        "epoch",
        "restarted",
        "inst_regret",
        "cum_regret",
    ])?;
    for (idx, record) in artifacts.trace.rounds.iter().enumerate() {
        writer.write_record(&[
            record.round.to_string(),
            record.arm.get().to_string(),
            u8::from(record.in_exploration).to_string(),
            record.d_max.map(|d| d.to_string()).unwrap_or_default(),
            record.epoch.to_string(),
            u8::from(record.restarted).to_string(),
            artifacts.regret.instantaneous[idx].to_string(),
            artifacts.regret.cumulative[idx].to_string(),
        ])?;
    }
    let bytes = writer
        .into_inner()
        .map_err(|e| Error::InvalidExperiment(format!("trace buffer: {e}")))?;
    Ok(String::from_utf8(bytes).expect("trace output is ASCII"))
}

pub fn render_summary_json(result: &RunResult) -> Result<String> {
    Ok(serde_json::to_string_pretty(result)? + "\n")
}

pub fn render_batch_json(batch: &BatchResult) -> Result<String> {
    Ok(serde_json::to_string_pretty(batch)? + "\n")
}

pub fn render_scaling_json(study: &ScalingStudy) -> Result<String> {
    Ok(serde_json::to_string_pretty(study)? + "\n")
}

/// Render the scaling sweep as a flat table (`sd` empty for one replication).
pub fn render_scaling_csv(study: &ScalingStudy) -> Result<String> {
    let mut writer = csv::Writer::from_writer(Vec::new());
    writer.write_record(["horizon", "mean_final_regret", "sd_final_regret"])?;
    for point in &study.points {
        writer.write_record(&[
            point.horizon.to_string(),
            point.mean_final_regret.to_string(),
            point
                .sd_final_regret
                .map(|s| s.to_string())
                .unwrap_or_default(),
        ])?;
    }
    let bytes = writer
        .into_inner()
        .map_err(|e| Error::InvalidExperiment(format!("scaling buffer: {e}")))?;
    Ok(String::from_utf8(bytes).expect("scaling output is ASCII"))
}

/// Refuse to overwrite `path` if it records a different configuration
/// digest (unless `force`). Files without a readable digest are left to
/// ordinary overwrite semantics.
fn guard_digest(path: &Path, digest: &str, force: bool) -> Result<()> {
    if force || !path.exists() {
        return Ok(());
    }
    let text = fs::read_to_string(path)?;
    let value: serde_json::Value = serde_json::from_str(&text)?;
    if let Some(existing) = value.get("config_digest").and_then(|v| v.as_str()) {
        if existing != digest {
            return Err(Error::DigestMismatch {
                path: path.display().to_string(),
                existing: existing.to_string(),
                new: digest.to_string(),
            });
        }
    }
    Ok(())
}

/// Write `trace.csv` and `summary.json` into `dir`, creating it if needed.
pub fn write_run(dir: &Path, artifacts: &RunArtifacts, force: bool) -> Result<(PathBuf, PathBuf)> {
    fs::create_dir_all(dir)?;
    let summary_path = dir.join("summary.json");
    guard_digest(&summary_path, &artifacts.result.config_digest, force)?;
    let trace_path = dir.join("trace.csv");
    fs::write(&trace_path, render_trace_csv(artifacts)?)?;
    fs::write(&summary_path, render_summary_json(&artifacts.result)?)?;
    Ok((trace_path, summary_path))
}

/// Write `batch_summary.json` into `dir`, creating it if needed.
pub fn write_batch(dir: &Path, batch: &BatchResult, force: bool) -> Result<PathBuf> {
    fs::create_dir_all(dir)?;
    let path = dir.join("batch_summary.json");
    guard_digest(&path, &batch.config_digest, force)?;
    fs::write(&path, render_batch_json(batch)?)?;
    Ok(path)
}

/// Write `scaling.json` and `scaling.csv` into `dir`, creating it if needed.
pub fn write_scaling(dir: &Path, study: &ScalingStudy, force: bool) -> Result<(PathBuf, PathBuf)> {
    fs::create_dir_all(dir)?;
    let json_path = dir.join("scaling.json");
    guard_digest(&json_path, &study.config_digest, force)?;
    let csv_path = dir.join("scaling.csv");
    fs::write(&csv_path, render_scaling_csv(study)?)?;
    fs::write(&json_path, render_scaling_json(study)?)?;
    Ok((json_path, csv_path))
}
