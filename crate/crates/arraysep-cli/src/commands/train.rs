//! Training run: sequential steps over the manifest with a per-step CSV
//! log and a final checkpoint.

use std::path::{Path, PathBuf};

use anyhow::Context;

use arraysep::dataset::read_manifest;
use arraysep::model::{save_checkpoint, train_step, TrainState};

use crate::config::{config_hash, ExperimentConfig};

pub struct TrainOutcome {
    pub checkpoint_path: PathBuf,
    pub log_path: PathBuf,
    pub first_loss: f64,
    pub final_loss: f64,
}

pub fn run(
    config: &ExperimentConfig,
    manifest_path: &Path,
    out_dir: &Path,
) -> anyhow::Result<TrainOutcome> {
    let mut entries = read_manifest(manifest_path)?;
    anyhow::ensure!(!entries.is_empty(), "manifest is empty");
    entries.sort_by(|a, b| a.id.cmp(&b.id));
    for e in &entries {
        anyhow::ensure!(
            e.scenario.n_speakers() == config.dataset.n_speakers,
            "manifest entry {} has {} speakers, config says {}",
            e.id,
            e.scenario.n_speakers(),
            config.dataset.n_speakers
        );
    }
    let manifest_dir = manifest_path.parent().unwrap_or(Path::new("."));
    std::fs::create_dir_all(out_dir)?;

    let mut state = TrainState::init(
        config.model.separator_config(config.dataset.n_speakers),
        config.criterion,
        config.training.adam(),
        config.training.seed,
    )?;

    let hash = config_hash(config);
    let log_path = out_dir.join("train_log.csv");
    let mut log = csv::WriterBuilder::new()
        .from_path(&log_path)
        .context("opening train log")?;
    log.write_record([
        "step",
        "loss",
        "criterion",
        "permutations_scanned",
        "pairwise_evals",
        "config_hash",
        "seed",
    ])?;

    let mut first_loss = f64::NAN;
    let mut final_loss = f64::NAN;
    for step in 0..config.training.steps {
        let entry = &entries[step % entries.len()];
        let example = super::load_example(manifest_dir, entry)?;
        let report = train_step(&mut state, &example)
            .with_context(|| format!("train step {step} on {}", entry.id))?;
        if step == 0 {
            first_loss = report.total_loss;
        }
        final_loss = report.total_loss;
        log.write_record([
            step.to_string(),
            format!("{:.8}", report.total_loss),
            report.assignment.criterion.to_string(),
            report.permutations_scanned.to_string(),
            report.pairwise_evals.to_string(),
            hash.clone(),
            config.training.seed.to_string(),
        ])?;
    }
    log.flush()?;

    let checkpoint_path = out_dir.join("model.ckpt");
    save_checkpoint(&state, &checkpoint_path)?;
    Ok(TrainOutcome {
        checkpoint_path,
        log_path,
        first_loss,
        final_loss,
    })
}
