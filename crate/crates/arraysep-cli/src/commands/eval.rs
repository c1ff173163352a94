//! Evaluation sweeps: per-example metric records, aggregate and
//! azimuth-gap-binned summaries, an ideal-mask oracle mode, and combined
//! dynamic selection between an azimuth-trained and a distance-trained
//! model.

use std::path::{Path, PathBuf};

use anyhow::Context;
use serde::Serialize;

use arraysep::acoustics::MixtureExample;
use arraysep::criteria::{dynamic_select, Criterion};
use arraysep::localization::{build_steering_table, estimate_azimuths, LOCALIZATION_GRID_DEG};
use arraysep::metrics::{eval_example, EvalRecord, SpeakerScores};
use arraysep::model::{load_checkpoint, separate_spectrograms, separate_waveforms, TrainState};
use arraysep::signals::{istft, StftConfig, Waveform};

use crate::config::{config_hash, ExperimentConfig};

pub enum EvalModel {
    Checkpoint(Box<TrainState>),
    Combined {
        azimuth: Box<TrainState>,
        distance: Box<TrainState>,
        threshold_deg: f64,
    },
    /// Ideal-cIRM estimates; upper-bounds the pipeline.
    OracleCirm,
}

impl EvalModel {
    pub fn from_args(
        checkpoint: Option<&Path>,
        checkpoint_distance: Option<&Path>,
        oracle: bool,
        threshold_deg: f64,
    ) -> anyhow::Result<Self> {
        match (checkpoint, checkpoint_distance, oracle) {
            (None, None, true) => Ok(EvalModel::OracleCirm),
            (Some(a), None, false) => Ok(EvalModel::Checkpoint(Box::new(
                load_checkpoint(a).with_context(|| format!("checkpoint {a:?}"))?,
            ))),
            (Some(a), Some(d), false) => {
                let azimuth = load_checkpoint(a).with_context(|| format!("checkpoint {a:?}"))?;
                let distance = load_checkpoint(d).with_context(|| format!("checkpoint {d:?}"))?;
                anyhow::ensure!(
                    azimuth.criterion == Criterion::Azimuth,
                    "combined mode: first checkpoint was trained with {}, expected azimuth",
                    azimuth.criterion
                );
                anyhow::ensure!(
                    distance.criterion == Criterion::Distance,
                    "combined mode: second checkpoint was trained with {}, expected distance",
                    distance.criterion
                );
                Ok(EvalModel::Combined {
                    azimuth: Box::new(azimuth),
                    distance: Box::new(distance),
                    threshold_deg,
                })
            }
            _ => anyhow::bail!(
                "pass --checkpoint, or --checkpoint plus --checkpoint-distance, or --oracle-cirm"
            ),
        }
    }
}

#[derive(Debug, Serialize)]
struct RecordRow<'a> {
    id: &'a str,
    config_hash: &'a str,
    seed: u64,
    min_gap_deg: Option<f64>,
    criterion: &'a str,
    record: &'a EvalRecord,
}

#[derive(Debug, Clone, Serialize)]
pub struct SummaryRow {
    pub group: String,
    pub n_examples: usize,
    pub estoi: f64,
    /// Always the omitted-metric marker; kept for column parity with the
    /// reference tables.
    pub pesq: String,
    pub si_snr_db: f64,
    pub sdr_db: f64,
    pub delta_estoi: f64,
    pub delta_si_snr_db: f64,
    pub delta_sdr_db: f64,
}

pub struct EvalOutcome {
    pub records_path: PathBuf,
    pub summary_path: PathBuf,
    pub summary: Vec<SummaryRow>,
    pub records: Vec<(String, Option<f64>, Criterion, EvalRecord)>,
    /// Fraction of examples routed to the distance model (combined mode).
    pub distance_selection_rate: Option<f64>,
}

fn mean(values: impl Iterator<Item = f64>) -> f64 {
    let (mut sum, mut n) = (0.0, 0usize);
    for v in values {
        sum += v;
        n += 1;
    }
    if n == 0 {
        f64::NAN
    } else {
        sum / n as f64
    }
}

fn summarize(group: &str, records: &[&EvalRecord]) -> SummaryRow {
    let speakers: Vec<&SpeakerScores> = records.iter().flat_map(|r| r.speakers.iter()).collect();
    SummaryRow {
        group: group.to_string(),
        n_examples: records.len(),
        estoi: mean(speakers.iter().map(|s| s.estoi)),
        pesq: "--".into(),
        si_snr_db: mean(speakers.iter().map(|s| s.si_snr_db)),
        sdr_db: mean(speakers.iter().map(|s| s.sdr_db)),
        delta_estoi: mean(speakers.iter().map(|s| s.delta_estoi)),
        delta_si_snr_db: mean(speakers.iter().map(|s| s.delta_si_snr_db)),
        delta_sdr_db: mean(speakers.iter().map(|s| s.delta_sdr_db)),
    }
}

/// Separated estimates plus the criterion charged for them.
fn estimates_for(
    model: &EvalModel,
    example: &MixtureExample,
    stft_cfg: &StftConfig,
) -> anyhow::Result<(Vec<Waveform>, Criterion)> {
    match model {
        EvalModel::Checkpoint(state) => Ok((
            separate_waveforms(&state.separator, &state.stft, &example.mixture)?,
            state.criterion,
        )),
        EvalModel::OracleCirm => Ok((
            super::oracle_cirm_estimates(example, stft_cfg)?,
            Criterion::Combined,
        )),
        EvalModel::Combined {
            azimuth,
            distance,
            threshold_deg,
        } => {
            // Localize the azimuth model's separated speakers, then route
            // by the estimated azimuth gap.
            let (est_specs, mix_specs) =
                separate_spectrograms(&azimuth.separator, &azimuth.stft, &example.mixture)?;
            let table =
                build_steering_table(&example.scenario.array, LOCALIZATION_GRID_DEG)?;
            let est = estimate_azimuths(&est_specs, &mix_specs, &table)?;
            let chosen = dynamic_select(&est.azimuths_deg, *threshold_deg)?;
            let state = match chosen {
                Criterion::Distance => distance,
                _ => azimuth,
            };
            let wavs = if chosen == Criterion::Azimuth {
                // Reuse the already-computed azimuth spectrograms.
                est_specs
                    .iter()
                    .map(|s| istft(s, &azimuth.stft, example.mixture.len()))
                    .collect::<Result<_, _>>()?
            } else {
                separate_waveforms(&state.separator, &state.stft, &example.mixture)?
            };
            Ok((wavs, chosen))
        }
    }
}

pub fn run(
    config: &ExperimentConfig,
    manifest_path: &Path,
    model: &EvalModel,
    out_dir: &Path,
) -> anyhow::Result<EvalOutcome> {
    let mut entries = arraysep::dataset::read_manifest(manifest_path)?;
    anyhow::ensure!(!entries.is_empty(), "manifest is empty");
    entries.sort_by(|a, b| a.id.cmp(&b.id));
    let manifest_dir = manifest_path.parent().unwrap_or(Path::new("."));
    std::fs::create_dir_all(out_dir)?;
    let hash = config_hash(config);
    let stft_cfg = StftConfig::default();

    let records_path = out_dir.join("eval_records.jsonl");
    let mut records_file = std::fs::File::create(&records_path)?;
    let mut records = Vec::with_capacity(entries.len());
    let mut distance_selected = 0usize;

    for entry in &entries {
        let example = super::load_example(manifest_dir, entry)?;
        let (estimates, criterion) = estimates_for(model, &example, &stft_cfg)?;
        if criterion == Criterion::Distance {
            distance_selected += 1;
        }
        let record = eval_example(
            &estimates,
            &example.targets,
            example.mixture.reference(),
            config.eval.scoring,
        )?;
        let min_gap = example.scenario.min_azimuth_gap();
        use std::io::Write;
        writeln!(
            records_file,
            "{}",
            serde_json::to_string(&RecordRow {
                id: &entry.id,
                config_hash: &hash,
                seed: entry.seed,
                min_gap_deg: min_gap,
                criterion: &criterion.to_string(),
                record: &record,
            })?
        )?;
        records.push((entry.id.clone(), min_gap, criterion, record));
    }

    // Aggregate plus azimuth-gap bins.
    let mut summary = vec![summarize(
        "all",
        &records.iter().map(|(_, _, _, r)| r).collect::<Vec<_>>(),
    )];
    let edges = &config.eval.gap_bins_deg;
    for pair in edges.windows(2) {
        let (lo, hi) = (pair[0], pair[1]);
        let in_bin: Vec<&EvalRecord> = records
            .iter()
            .filter(|(_, gap, _, _)| gap.is_some_and(|g| g >= lo && g < hi))
            .map(|(_, _, _, r)| r)
            .collect();
        if !in_bin.is_empty() {
            summary.push(summarize(&format!("gap[{lo},{hi})"), &in_bin));
        }
    }

    let summary_path = out_dir.join("eval_summary.csv");
    let mut w = csv::WriterBuilder::new().from_path(&summary_path)?;
    w.write_record([
        "group",
        "n_examples",
        "estoi",
        "pesq",
        "si_snr_db",
        "sdr_db",
        "delta_estoi",
        "delta_si_snr_db",
        "delta_sdr_db",
        "config_hash",
    ])?;
    for row in &summary {
        w.write_record([
            row.group.clone(),
            row.n_examples.to_string(),
            format!("{:.4}", row.estoi),
            row.pesq.clone(),
            format!("{:.3}", row.si_snr_db),
            format!("{:.3}", row.sdr_db),
            format!("{:.4}", row.delta_estoi),
            format!("{:.3}", row.delta_si_snr_db),
            format!("{:.3}", row.delta_sdr_db),
            hash.clone(),
        ])?;
    }
    w.flush()?;

    let distance_selection_rate = matches!(model, EvalModel::Combined { .. })
        .then(|| distance_selected as f64 / records.len() as f64);
    Ok(EvalOutcome {
        records_path,
        summary_path,
        summary,
        records,
        distance_selection_rate,
    })
}
