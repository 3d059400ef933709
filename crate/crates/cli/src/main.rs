//! Monte-Carlo ranging benchmark CLI.

use anyhow::{bail, Context};
use cirsplice::config::{ExperimentConfig, RegularizerMultipliers, RegularizerSpec};
use cirsplice::harness::{
    calibrate_regularizers, read_trials, run_monte_carlo, run_trial, save_calibration,
    win_rates, MonteCarloOutput, SharedDictionaries, TrialOptions,
};
use clap::{Args, Parser, Subcommand};
use std::path::PathBuf;

#[derive(Parser)]
#[command(
    name = "cirsplice",
    about = "Sparse multipath ranging from multi-band CSI magnitudes: Monte-Carlo benchmark tools",
    version
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Clone)]
struct CommonArgs {
    /// JSON experiment configuration; defaults are used when absent.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Master seed override.
    #[arg(long)]
    seed: Option<u64>,
    /// Trial count override.
    #[arg(long)]
    trials: Option<u64>,
    /// SNR points in dB (repeatable); overrides the config list.
    #[arg(long = "snr-db")]
    snr_db: Vec<f64>,
    /// Output directory.
    #[arg(long, default_value = "out")]
    out_dir: PathBuf,
    /// Worker threads: 1 = sequential, 0 = all cores.
    #[arg(long, default_value_t = 0)]
    threads: usize,
}

#[derive(Subcommand)]
enum Command {
    /// Run the Monte-Carlo benchmark and write CDF tables plus a summary.
    Simulate {
        #[command(flatten)]
        common: CommonArgs,
        /// Run only the baseline method.
        #[arg(long, conflicts_with = "pr_only")]
        baseline_only: bool,
        /// Run only the magnitude-retrieval method.
        #[arg(long)]
        pr_only: bool,
        /// Also write per-trial records to trials.jsonl.
        #[arg(long)]
        dump_trials: bool,
        /// Calibration file to read multipliers from (written by `calibrate`).
        #[arg(long)]
        calibration: Option<PathBuf>,
    },
    /// Grid-search the regularizer multipliers on training realizations.
    Calibrate {
        #[command(flatten)]
        common: CommonArgs,
    },
    /// Run one seeded trial and dump every pipeline stage as JSON.
    Trial {
        #[command(flatten)]
        common: CommonArgs,
        /// Trial index to reproduce.
        #[arg(long, default_value_t = 0)]
        trial_id: u64,
    },
    /// Summarize per-trial records from an earlier `simulate --dump-trials`.
    Report {
        /// Directory containing trials.jsonl.
        #[arg(long, default_value = "out")]
        out_dir: PathBuf,
    },
}

fn load_config(common: &CommonArgs) -> anyhow::Result<ExperimentConfig> {
    let mut config = match &common.config {
        Some(path) => {
            let text = std::fs::read_to_string(path)
                .with_context(|| format!("reading config {}", path.display()))?;
            ExperimentConfig::from_json(&text)?
        }
        None => ExperimentConfig::default(),
    };
    if let Some(seed) = common.seed {
        config.seed = seed;
    }
    if let Some(trials) = common.trials {
        config.trials = trials;
    }
    if !common.snr_db.is_empty() {
        config.snr_db = common.snr_db.clone();
    }
    Ok(config)
}

fn print_summary(output: &MonteCarloOutput) {
    for snr in &output.summary.per_snr {
        let pr_median = snr
            .pr
            .median_error_m
            .map(|v| format!("{v:.4}"))
            .unwrap_or_else(|| "n/a".into());
        let base_median = snr
            .baseline
            .median_error_m
            .map(|v| format!("{v:.4}"))
            .unwrap_or_else(|| "n/a".into());
        println!(
            "snr {:>5} dB | pr median {pr_median} m ({} fail) | baseline median {base_median} m ({} fail) | pr wins {:.1}%",
            snr.snr_db,
            snr.pr.failures,
            snr.baseline.failures,
            100.0 * snr.win_rate_pr
        );
    }
    println!("runtime: {:.1} s", output.summary.runtime_s);
}

fn main() -> anyhow::Result<()> {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    match cli.command {
        Command::Simulate {
            common,
            baseline_only,
            pr_only,
            dump_trials,
            calibration,
        } => {
            let mut config = load_config(&common)?;
            if config.regularizers.is_calibrate()? {
                eprintln!("regularizers set to \"calibrate\": running calibration first");
                let records = calibrate_regularizers(&config, common.threads)?;
                let record = &records[0];
                config.regularizers = RegularizerSpec::Fixed(RegularizerMultipliers {
                    c_rho: record.c_rho,
                    c_lambda: record.c_lambda,
                    c_lambda_b: record.c_lambda_b,
                });
            } else if let Some(path) = &calibration {
                let snr = config.snr_db[0];
                match cirsplice::harness::load_calibration(path, &config, snr)? {
                    Some(record) => {
                        config.regularizers = RegularizerSpec::Fixed(RegularizerMultipliers {
                            c_rho: record.c_rho,
                            c_lambda: record.c_lambda,
                            c_lambda_b: record.c_lambda_b,
                        });
                    }
                    None => bail!(
                        "no calibration record for this configuration in {}",
                        path.display()
                    ),
                }
            }
            let options = TrialOptions {
                run_pr: !baseline_only,
                run_baseline: !pr_only,
                collect_trace: false,
            };
            let output = run_monte_carlo(&config, common.threads, options)?;
            output.write_outputs(&common.out_dir, dump_trials)?;
            print_summary(&output);
            println!("outputs written to {}", common.out_dir.display());
        }
        Command::Calibrate { common } => {
            let config = load_config(&common)?;
            let records = calibrate_regularizers(&config, common.threads)?;
            let path = common.out_dir.join("calibration.json");
            save_calibration(&path, &config, &records)?;
            for record in &records {
                println!(
                    "snr {:>5} dB: c_rho {} c_lambda {} c_lambda_b {} (median pr {:.4} m, baseline {:.4} m){}",
                    record.snr_db,
                    record.c_rho,
                    record.c_lambda,
                    record.c_lambda_b,
                    record.median_pr_error_m,
                    record.median_baseline_error_m,
                    if record.on_grid_boundary {
                        " [on grid boundary]"
                    } else {
                        ""
                    }
                );
            }
            println!("calibration written to {}", path.display());
        }
        Command::Trial { common, trial_id } => {
            let config = load_config(&common)?;
            let setup = config.resolve()?;
            let dicts = SharedDictionaries::build(&setup)?;
            let snr_db = config.snr_db[0];
            let options = TrialOptions {
                run_pr: true,
                run_baseline: true,
                collect_trace: true,
            };
            let (result, trace) =
                run_trial(&setup, &dicts, snr_db, config.seed, trial_id, options);
            let dump = serde_json::json!({
                "result": result,
                "trace": trace,
            });
            println!("{}", serde_json::to_string_pretty(&dump)?);
        }
        Command::Report { out_dir } => {
            let path = out_dir.join("trials.jsonl");
            let trials = read_trials(&path)
                .with_context(|| format!("reading {}", path.display()))?;
            if trials.is_empty() {
                bail!("no trials found in {}", path.display());
            }
            let mut by_snr: Vec<f64> = trials.iter().map(|t| t.snr_db).collect();
            by_snr.sort_by(f64::total_cmp);
            by_snr.dedup();
            for snr in by_snr {
                let subset: Vec<_> = trials.iter().filter(|t| t.snr_db == snr).collect();
                let pr: Vec<Option<f64>> = subset.iter().map(|t| t.pr_error_m).collect();
                let base: Vec<Option<f64>> = subset.iter().map(|t| t.baseline_error_m).collect();
                let (w, l, t) = win_rates(&pr, &base);
                let mut pr_valid: Vec<f64> = pr.iter().filter_map(|e| *e).collect();
                pr_valid.sort_by(f64::total_cmp);
                let mut base_valid: Vec<f64> = base.iter().filter_map(|e| *e).collect();
                base_valid.sort_by(f64::total_cmp);
                let median = |v: &[f64]| {
                    if v.is_empty() {
                        "n/a".to_string()
                    } else {
                        format!("{:.4}", v[(v.len() - 1) / 2])
                    }
                };
                println!(
                    "snr {snr} dB: {} trials | pr median {} m | baseline median {} m | win/lose/tie {:.2}/{:.2}/{:.2}",
                    subset.len(),
                    median(&pr_valid),
                    median(&base_valid),
                    w,
                    l,
                    t
                );
            }
        }
    }
    Ok(())
}
