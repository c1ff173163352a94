use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use serde_json::json;

use arraysep_cli::commands::{eval, localize, simulate, train};
use arraysep_cli::config::{load_config, ExperimentConfig};

#[derive(Parser)]
#[command(
    name = "arraysep",
    version,
    about = "Multi-channel speaker separation lab: simulate, train, eval, localize, bench"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Sample acoustic scenes and write a spatialized dataset.
    Simulate {
        /// Experiment config JSON ({} for all defaults).
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        out_dir: PathBuf,
        /// Overrides the dataset seed from the config.
        #[arg(long)]
        seed: Option<u64>,
        /// Also export per-scenario RIRs as WAV files.
        #[arg(long)]
        write_rirs: bool,
    },
    /// Train a separator on a simulated dataset.
    Train {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        manifest: PathBuf,
        #[arg(long)]
        out_dir: PathBuf,
        /// Overrides the training seed from the config.
        #[arg(long)]
        seed: Option<u64>,
    },
    /// Score separated estimates against targets.
    Eval {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        manifest: PathBuf,
        #[arg(long)]
        out_dir: PathBuf,
        /// Checkpoint to evaluate (azimuth branch in combined mode).
        #[arg(long)]
        checkpoint: Option<PathBuf>,
        /// Distance-trained checkpoint; together with --checkpoint enables
        /// combined dynamic selection.
        #[arg(long)]
        checkpoint_distance: Option<PathBuf>,
        /// Evaluate the ideal-mask oracle instead of a model.
        #[arg(long)]
        oracle_cirm: bool,
    },
    /// Estimate speaker azimuths for a 7-channel mixture WAV.
    Localize {
        #[arg(long)]
        mixture: PathBuf,
        /// Separated estimate WAVs (one per speaker); omit to localize the
        /// raw mixture.
        #[arg(long, num_args = 0..)]
        estimates: Vec<PathBuf>,
        #[arg(long, default_value_t = 1.0)]
        grid_step: f64,
        /// Include full score profiles in the JSON output.
        #[arg(long)]
        emit_profile: bool,
        /// Write JSON here instead of stdout.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Assignment-complexity benchmark (permutation scan vs location
    /// pairing).
    Bench {
        #[arg(long, default_value_t = 8)]
        max_n: usize,
        #[arg(long, default_value_t = 200)]
        reps: usize,
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

fn run(cli: Cli) -> anyhow::Result<()> {
    match cli.command {
        Command::Simulate {
            config,
            out_dir,
            seed,
            write_rirs,
        } => {
            let mut cfg: ExperimentConfig = load_config(&config)?;
            if let Some(seed) = seed {
                cfg.dataset.seed = seed;
            }
            let outcome = simulate::run(&cfg, &out_dir, write_rirs)?;
            println!(
                "{}",
                json!({
                    "manifest": outcome.manifest_path,
                    "examples": outcome.entries,
                })
            );
        }
        Command::Train {
            config,
            manifest,
            out_dir,
            seed,
        } => {
            let mut cfg = load_config(&config)?;
            if let Some(seed) = seed {
                cfg.training.seed = seed;
            }
            let outcome = train::run(&cfg, &manifest, &out_dir)?;
            println!(
                "{}",
                json!({
                    "checkpoint": outcome.checkpoint_path,
                    "log": outcome.log_path,
                    "first_loss": outcome.first_loss,
                    "final_loss": outcome.final_loss,
                })
            );
        }
        Command::Eval {
            config,
            manifest,
            out_dir,
            checkpoint,
            checkpoint_distance,
            oracle_cirm,
        } => {
            let cfg = load_config(&config)?;
            let model = eval::EvalModel::from_args(
                checkpoint.as_deref(),
                checkpoint_distance.as_deref(),
                oracle_cirm,
                cfg.eval.selection_threshold_deg,
            )?;
            let outcome = eval::run(&cfg, &manifest, &model, &out_dir)?;
            let mut msg = json!({
                "records": outcome.records_path,
                "summary": outcome.summary_path,
                "examples": outcome.records.len(),
                "mean_si_snr_db": outcome.summary[0].si_snr_db,
            });
            if let Some(rate) = outcome.distance_selection_rate {
                msg["distance_selection_rate"] = json!(rate);
            }
            println!("{msg}");
        }
        Command::Localize {
            mixture,
            estimates,
            grid_step,
            emit_profile,
            out,
        } => {
            let value = localize::run(&mixture, &estimates, grid_step, emit_profile)?;
            match out {
                Some(path) => std::fs::write(path, serde_json::to_string_pretty(&value)?)?,
                None => println!("{value}"),
            }
        }
        Command::Bench { max_n, reps, out } => {
            anyhow::ensure!(max_n <= 8, "max-n is capped at 8 (factorial scan)");
            let report = arraysep_cli::bench::run_bench(max_n, reps);
            let text = serde_json::to_string_pretty(&report)?;
            match out {
                Some(path) => std::fs::write(path, text)?,
                None => println!("{text}"),
            }
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            let kind = if e.downcast_ref::<serde_json::Error>().is_some() {
                "config"
            } else if e.downcast_ref::<std::io::Error>().is_some() {
                "io"
            } else {
                "run"
            };
            eprintln!("{}", json!({ "kind": kind, "error": format!("{e:#}") }));
            ExitCode::FAILURE
        }
    }
}
