//! Standalone localization: mask-weighted GCC-PHAT azimuth estimates for
//! a mixture WAV, optionally weighted by separated-estimate WAVs.

use std::path::Path;

use anyhow::Context;
use serde_json::json;

use arraysep::acoustics::ArrayGeometry;
use arraysep::localization::{build_steering_table, estimate_azimuths};
use arraysep::signals::{read_wav, stft, ComplexSpectrogram, StftConfig};

pub fn run(
    mixture_path: &Path,
    estimate_paths: &[std::path::PathBuf],
    grid_step_deg: f64,
    emit_profile: bool,
) -> anyhow::Result<serde_json::Value> {
    let mixture = read_wav(mixture_path).with_context(|| format!("mixture {mixture_path:?}"))?;
    let cfg = StftConfig::default();
    let channels: Vec<ComplexSpectrogram> = mixture
        .channels
        .iter()
        .map(|ch| stft(ch, &cfg))
        .collect::<Result<_, _>>()?;

    let estimates: Vec<ComplexSpectrogram> = if estimate_paths.is_empty() {
        // No separated estimates: localize the whole mixture (mask of
        // ones, a single profile).
        vec![channels[0].clone()]
    } else {
        estimate_paths
            .iter()
            .map(|p| {
                let wav = read_wav(p).with_context(|| format!("estimate {p:?}"))?;
                anyhow::ensure!(wav.n_channels() == 1, "estimate {p:?} is not mono");
                anyhow::ensure!(
                    wav.len() == mixture.len(),
                    "estimate {p:?} length differs from the mixture"
                );
                Ok(stft(&wav.channels[0], &cfg)?)
            })
            .collect::<anyhow::Result<_>>()?
    };

    let array = ArrayGeometry::default();
    anyhow::ensure!(
        mixture.n_channels() == array.n_mics(),
        "expected a {}-channel array recording, got {} channels",
        array.n_mics(),
        mixture.n_channels()
    );
    let table = build_steering_table(&array, grid_step_deg)?;
    let set = estimate_azimuths(&estimates, &channels, &table)?;

    let speakers: Vec<serde_json::Value> = set
        .azimuths_deg
        .iter()
        .zip(set.profiles.iter())
        .map(|(az, profile)| {
            let mut obj = json!({ "azimuth_deg": az, "grid_step_deg": grid_step_deg });
            if emit_profile {
                obj["score_profile"] = json!(profile);
            }
            obj
        })
        .collect();
    Ok(json!({ "grid_step_deg": grid_step_deg, "speakers": speakers }))
}
