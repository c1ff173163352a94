//! Command implementations behind the `arraysep` binary.

pub mod eval;
pub mod localize;
pub mod simulate;
pub mod train;

use std::path::Path;

use anyhow::Context;

use arraysep::acoustics::MixtureExample;
use arraysep::dataset::ManifestEntry;
use arraysep::signals::{read_wav, Waveform};

/// Loads an example's audio from the WAV paths in its manifest entry,
/// resolved relative to the manifest's directory.
pub fn load_example(manifest_dir: &Path, entry: &ManifestEntry) -> anyhow::Result<MixtureExample> {
    let mixture = read_wav(manifest_dir.join(&entry.mixture_wav))
        .with_context(|| format!("mixture of {}", entry.id))?;
    let targets: Vec<Waveform> = entry
        .target_wavs
        .iter()
        .map(|p| {
            let wav = read_wav(manifest_dir.join(p))
                .with_context(|| format!("target {p} of {}", entry.id))?;
            anyhow::ensure!(
                wav.n_channels() == 1,
                "target {p} of {} is not mono",
                entry.id
            );
            Ok(wav.channels.into_iter().next().unwrap())
        })
        .collect::<anyhow::Result<_>>()?;
    Ok(MixtureExample {
        mixture,
        targets,
        scenario: entry.scenario.clone(),
        utterance_ids: entry.utterance_ids.clone(),
    })
}

/// Oracle separation: the ideal complex ratio mask of each target applied
/// back to the reference-channel mixture.
pub fn oracle_cirm_estimates(
    example: &MixtureExample,
    stft_cfg: &arraysep::signals::StftConfig,
) -> anyhow::Result<Vec<Waveform>> {
    let y_ref = arraysep::signals::stft(example.mixture.reference(), stft_cfg)?;
    example
        .targets
        .iter()
        .map(|t| {
            let s = arraysep::signals::stft(t, stft_cfg)?;
            let mask = arraysep::signals::ideal_cirm(&s, &y_ref)?;
            let est = arraysep::signals::apply_cirm(&mask, &y_ref)?;
            Ok(arraysep::signals::istft(&est, stft_cfg, example.mixture.len())?)
        })
        .collect()
}
