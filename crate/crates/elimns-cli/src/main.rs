//! Command-line front end for the experiment harness: single runs,
//! replication batches, horizon sweeps, partition statistics, and
//! environment validation.

use std::fs;
use std::path::PathBuf;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand};
use elimns::analysis::interval_partition;
use elimns::harness::{
    derive_stream, render_summary_json, run_batch, run_one, scaling_study, write_batch, write_run,
    write_scaling, ExperimentConfig, StreamPurpose,
};

#[derive(Parser)]
#[command(
    name = "elimns",
    version,
    about = "Simulation laboratory for restart-based elimination under non-stationary rewards"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct ConfigArgs {
    /// Path to the experiment configuration (JSON).
    #[arg(long)]
    config: PathBuf,
    /// Override the configuration's base seed.
    #[arg(long)]
    seed: Option<u64>,
}

#[derive(Subcommand)]
enum Command {
    /// Execute one replication and report (or write) its artifacts.
    Run {
        #[command(flatten)]
        config: ConfigArgs,
        /// Replication index (selects the derived random streams).
        #[arg(long, default_value_t = 0)]
        replication: u64,
        /// Directory for trace.csv and summary.json.
        #[arg(long)]
        out: Option<PathBuf>,
        /// Overwrite outputs even if they record a different configuration.
        #[arg(long)]
        force: bool,
    },
    /// Execute replications 0..N in parallel and aggregate them.
    Batch {
        #[command(flatten)]
        config: ConfigArgs,
        /// Number of replications.
        #[arg(long, default_value_t = 20)]
        seeds: u64,
        /// Directory for batch_summary.json.
        #[arg(long)]
        out: Option<PathBuf>,
        #[arg(long)]
        force: bool,
    },
    /// Re-run the experiment across horizons and fit the regret growth
    /// exponent.
    Scaling {
        #[command(flatten)]
        config: ConfigArgs,
        /// Comma-separated horizons, strictly increasing (at least three).
        #[arg(long, value_delimiter = ',', required = true)]
        horizons: Vec<usize>,
        /// Replications per horizon.
        #[arg(long, default_value_t = 10)]
        seeds: u64,
        /// Directory for scaling.json and scaling.csv.
        #[arg(long)]
        out: Option<PathBuf>,
        #[arg(long)]
        force: bool,
    },
    /// Partition a mean timeline (CSV, one row per round) into
    /// variation-balanced intervals.
    Partition {
        /// CSV of per-round means, one column per arm, no header.
        #[arg(long)]
        means: PathBuf,
        /// Variation budget (0 < c3 ≤ 0.5).
        #[arg(long, default_value_t = 0.5)]
        c3: f64,
    },
    /// Build the configured environment and print its ground-truth audit.
    ValidateEnv {
        #[command(flatten)]
        config: ConfigArgs,
        /// Replication index used to instantiate randomized families.
        #[arg(long, default_value_t = 0)]
        replication: u64,
    },
}

fn load_config(args: &ConfigArgs) -> Result<ExperimentConfig> {
    let text = fs::read_to_string(&args.config)
        .with_context(|| format!("reading {}", args.config.display()))?;
    let mut config = ExperimentConfig::from_json(&text)
        .with_context(|| format!("parsing {}", args.config.display()))?;
    if let Some(seed) = args.seed {
        config.base_seed = seed;
    }
    Ok(config)
}

fn main() -> Result<()> {
    // Die quietly when stdout closes early (e.g. piped into `head`) instead
    // of panicking on the broken pipe.
    #[cfg(unix)]
    unsafe {
        libc::signal(libc::SIGPIPE, libc::SIG_DFL);
    }
    match Cli::parse().command {
        Command::Run {
            config,
            replication,
            out,
            force,
        } => {
            let config = load_config(&config)?;
            let artifacts = run_one(&config, replication)?;
            let result = &artifacts.result;
            println!(
                "run: algorithm={} horizon={} arms={} replication={}",
                result.algorithm, result.horizon, result.num_arms, result.replication
            );
            println!(
                "  final_regret={:.4} restarts={} epochs={} eliminations={} invariant_checks={}",
                result.final_regret,
                result.restart_count,
                result.epochs,
                result.eliminations.len(),
                result.invariant_checks
            );
            println!(
                "  environment: switches={} gamma={} variation={:.4} (distribution {})",
                result.switch_count,
                result.gamma,
                result.bandit_variation,
                result
                    .auction_variation
                    .map(|v| format!("{v:.4}"))
                    .unwrap_or_else(|| "n/a".into())
            );
            for warning in &result.environment_warnings {
                eprintln!("  warning: {warning}");
            }
            println!("  config_digest={}", result.config_digest);
            println!("  wall_time_ms={}", result.wall_time_ms);
            match out {
                Some(dir) => {
                    let (trace, summary) = write_run(&dir, &artifacts, force)?;
                    println!("  wrote {} and {}", trace.display(), summary.display());
                }
                None => {
                    // No output directory: print the summary itself.
                    print!("{}", render_summary_json(result)?);
                }
            }
        }
        Command::Batch {
            config,
            seeds,
            out,
            force,
        } => {
            let config = load_config(&config)?;
            let batch = run_batch(&config, seeds)?;
            println!(
                "batch: replications={} mean_final_regret={:.4} sd={} zero_restart={} mean_restarts={:.2}",
                batch.replications,
                batch.mean_final_regret,
                batch
                    .sd_final_regret
                    .map(|s| format!("{s:.4}"))
                    .unwrap_or_else(|| "n/a".into()),
                batch.zero_restart_replications,
                batch.mean_restart_count
            );
            println!("  config_digest={}", batch.config_digest);
            if let Some(dir) = out {
                let path = write_batch(&dir, &batch, force)?;
                println!("  wrote {}", path.display());
            }
        }
        Command::Scaling {
            config,
            horizons,
            seeds,
            out,
            force,
        } => {
            let config = load_config(&config)?;
            let study = scaling_study(&config, &horizons, seeds)?;
            println!(
                "scaling: algorithm={} replications_per_horizon={}",
                study.algorithm, study.replications
            );
            for point in &study.points {
                println!(
                    "  T={:<8} mean_final_regret={:.4}{}",
                    point.horizon,
                    point.mean_final_regret,
                    point
                        .sd_final_regret
                        .map(|s| format!(" sd={s:.4}"))
                        .unwrap_or_default()
                );
            }
            match study.log_log_slope {
                Some(slope) => println!("  log_log_slope={slope:.4}"),
                None => println!("  log_log_slope=n/a (non-positive mean regret)"),
            }
            if let Some(dir) = out {
                let (json, csv) = write_scaling(&dir, &study, force)?;
                println!("  wrote {} and {}", json.display(), csv.display());
            }
        }
        Command::Partition { means, c3 } => {
            let matrix = read_means_csv(&means)?;
            let partition = interval_partition(&matrix, c3)?;
            println!("gamma={}", partition.gamma());
            for interval in &partition.intervals {
                println!(
                    "  [{}, {}] length={} variation={:.6}",
                    interval.start,
                    interval.end,
                    interval.end - interval.start + 1,
                    interval.variation
                );
            }
        }
        Command::ValidateEnv {
            config,
            replication,
        } => {
            let config = load_config(&config)?;
            let mut rng = derive_stream(config.base_seed, replication, StreamPurpose::Environment);
            let schedule = config.build_environment(&mut rng)?;
            let audit = schedule.audit();
            println!(
                "environment: horizon={} arms={} auction={}",
                schedule.horizon(),
                schedule.num_arms(),
                schedule.is_auction()
            );
            println!(
                "  switches={} change_rounds={} mean_variation={:.6} distribution_variation={}",
                audit.switch_count,
                audit.change_rounds.len(),
                audit.bandit_variation,
                audit
                    .auction_variation
                    .map(|v| format!("{v:.6}"))
                    .unwrap_or_else(|| "n/a".into())
            );
            let show = audit.best_arm_runs.len().min(20);
            println!("  best-arm runs ({} total):", audit.best_arm_runs.len());
            for run in &audit.best_arm_runs[..show] {
                println!(
                    "    rounds [{}, {}): arm {} (mean {:.4})",
                    run.start,
                    run.end_exclusive,
                    run.arm.get(),
                    run.mean
                );
            }
            if audit.best_arm_runs.len() > show {
                println!("    …");
            }
            for warning in &audit.warnings {
                eprintln!("  warning: {warning}");
            }
            println!("  config_digest={}", config.digest());
        }
    }
    Ok(())
}

/// Read a headerless CSV of per-round means (one column per arm).
fn read_means_csv(path: &PathBuf) -> Result<Vec<Vec<f64>>> {
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(false)
        .trim(csv::Trim::All)
        .from_path(path)
        .with_context(|| format!("reading {}", path.display()))?;
    let mut matrix = Vec::new();
    for (idx, record) in reader.records().enumerate() {
        let record = record?;
        let row: Vec<f64> = record
            .iter()
            .map(|field| {
                field
                    .parse::<f64>()
                    .with_context(|| format!("row {}: bad mean {field:?}", idx + 1))
            })
            .collect::<Result<_>>()?;
        matrix.push(row);
    }
    if matrix.is_empty() {
        bail!("{} holds no rows", path.display());
    }
    Ok(matrix)
}
