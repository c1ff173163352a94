//! Dataset simulation: sample scenes, spatialize dry utterances, write
//! WAVs and the JSONL manifest.

use std::path::{Path, PathBuf};

use anyhow::Context;

use arraysep::acoustics::{
    derive_seed, sample_scenario, simulate_rir, SamplerConfig, Scenario,
};
use arraysep::dataset::{write_manifest, ManifestEntry};
use arraysep::signals::{read_wav, write_wav, MultichannelWaveform, WavEncoding, Waveform};
use arraysep::synth::speech_like;
use arraysep::SAMPLE_RATE;

use crate::config::{config_hash, ExperimentConfig};

/// Dry-utterance RMS used by the bundled generator. Loud sources keep the
/// spectrogram features at O(1) after the 1/(4 pi d) propagation loss,
/// which the training budget needs; direct-path gains still leave every
/// rendered signal well inside [-1, 1].
const DRY_RMS: f64 = 0.5;

enum DrySource {
    Synth,
    Dir(Vec<PathBuf>),
}

impl DrySource {
    fn utterance(
        &self,
        seed: u64,
        len: usize,
    ) -> anyhow::Result<(Waveform, String)> {
        match self {
            DrySource::Synth => Ok((speech_like(seed, len, DRY_RMS), format!("synth-{seed:016x}"))),
            DrySource::Dir(files) => {
                let idx = (seed % files.len() as u64) as usize;
                let path = &files[idx];
                let wav = read_wav(path).with_context(|| format!("dry file {path:?}"))?;
                anyhow::ensure!(wav.n_channels() == 1, "dry file {path:?} is not mono");
                let mut samples = wav.channels.into_iter().next().unwrap().samples;
                anyhow::ensure!(!samples.is_empty(), "dry file {path:?} is empty");
                samples.truncate(len);
                let id = path
                    .file_stem()
                    .map(|s| s.to_string_lossy().into_owned())
                    .unwrap_or_else(|| format!("dry-{idx}"));
                Ok((Waveform::pipeline(samples), id))
            }
        }
    }
}

pub struct SimulateOutcome {
    pub manifest_path: PathBuf,
    pub entries: usize,
}

pub fn run(
    config: &ExperimentConfig,
    out_dir: &Path,
    write_rirs: bool,
) -> anyhow::Result<SimulateOutcome> {
    let ds = &config.dataset;
    let hash = config_hash(config);
    let wav_dir = out_dir.join("wavs");
    std::fs::create_dir_all(&wav_dir)?;
    let rir_dir = out_dir.join("rirs");
    if write_rirs {
        std::fs::create_dir_all(&rir_dir)?;
    }

    let dry = match &ds.dry_dir {
        None => DrySource::Synth,
        Some(dir) => {
            let mut files: Vec<PathBuf> = std::fs::read_dir(dir)
                .with_context(|| format!("dry dir {dir:?}"))?
                .filter_map(|e| e.ok().map(|e| e.path()))
                .filter(|p| p.extension().is_some_and(|e| e == "wav"))
                .collect();
            files.sort();
            anyhow::ensure!(!files.is_empty(), "dry dir {dir:?} has no .wav files");
            DrySource::Dir(files)
        }
    };

    let sampler = SamplerConfig {
        n_speakers: ds.n_speakers,
        azimuth_resolution_deg: ds.azimuth_resolution_deg,
        reverberant: ds.reverberant,
        min_gap_deg: ds.min_gap_deg,
        max_gap_deg: ds.max_gap_deg,
    };
    let utterance_len = (ds.utterance_secs * SAMPLE_RATE as f64).round() as usize;
    anyhow::ensure!(utterance_len > 0, "utterance length must be positive");

    let mut entries = Vec::with_capacity(ds.count);
    for i in 0..ds.count {
        let scene_seed = derive_seed(ds.seed, i as u64);
        let scenario = sample_scenario(scene_seed, &sampler)?;
        let mut signals = Vec::with_capacity(ds.n_speakers);
        let mut utterance_ids = Vec::with_capacity(ds.n_speakers);
        for k in 0..ds.n_speakers {
            let (mut wav, id) =
                dry.utterance(derive_seed(scene_seed, 1000 + k as u64), utterance_len)?;
            // Equal received level: scale each dry signal by its source
            // distance so the direct-path images at the array are equally
            // loud, mirroring the ~0 dB mixing convention of the standard
            // two-speaker corpora. Absolute level is set afterwards.
            let gain = scenario.sources[k].distance_m;
            for s in wav.samples.iter_mut() {
                *s *= gain;
            }
            signals.push(wav);
            utterance_ids.push(id);
        }
        let mut example = arraysep::acoustics::spatialize(&signals, &scenario)?;
        example.utterance_ids = utterance_ids;
        normalize_level(&mut example);

        let id = format!("ex{i:05}");
        let mixture_wav = format!("wavs/{id}_mix.wav");
        write_wav(
            out_dir.join(&mixture_wav),
            &example.mixture,
            WavEncoding::Float32,
        )?;
        let mut target_wavs = Vec::with_capacity(ds.n_speakers);
        for (k, target) in example.targets.iter().enumerate() {
            let path = format!("wavs/{id}_t{k}.wav");
            write_wav(
                out_dir.join(&path),
                &MultichannelWaveform::new(vec![target.clone()])?,
                WavEncoding::Float32,
            )?;
            target_wavs.push(path);
        }
        if write_rirs {
            write_scenario_rirs(&rir_dir, &id, &scenario)?;
        }
        entries.push(ManifestEntry {
            id,
            seed: scene_seed,
            config_hash: hash.clone(),
            scenario,
            utterance_ids: example.utterance_ids.clone(),
            mixture_wav,
            target_wavs,
        });
    }

    let manifest_path = out_dir.join("manifest.jsonl");
    write_manifest(&manifest_path, &entries)?;
    Ok(SimulateOutcome {
        manifest_path,
        entries: entries.len(),
    })
}

/// Reference-channel RMS every stored example is gained to.
const MIXTURE_RMS: f64 = 0.1;

/// Utterance-level gain normalization: one gain on every channel and
/// target, so masks, geometry cues, and metric relationships are
/// untouched while example levels stop varying with source distance.
fn normalize_level(example: &mut arraysep::acoustics::MixtureExample) {
    let rms = example.mixture.reference().rms();
    if rms <= 0.0 {
        return;
    }
    let gain = MIXTURE_RMS / rms;
    for ch in example.mixture.channels.iter_mut() {
        for s in ch.samples.iter_mut() {
            *s *= gain;
        }
    }
    for t in example.targets.iter_mut() {
        for s in t.samples.iter_mut() {
            *s *= gain;
        }
    }
}

/// RIR cache export: one 7-channel float32 WAV per source, keyed by
/// example id and source index.
fn write_scenario_rirs(rir_dir: &Path, id: &str, scenario: &Scenario) -> anyhow::Result<()> {
    let mics = scenario.mic_positions();
    for (k, _) in scenario.sources.iter().enumerate() {
        let src = scenario.source_position(k);
        let rirs: Vec<arraysep::acoustics::Rir> = mics
            .iter()
            .map(|&m| simulate_rir(&scenario.room, src, m))
            .collect::<Result<_, _>>()?;
        let len = rirs.iter().map(|r| r.taps.len()).max().unwrap_or(0);
        let channels: Vec<Waveform> = rirs
            .into_iter()
            .map(|mut r| {
                r.taps.resize(len, 0.0);
                Waveform::pipeline(r.taps)
            })
            .collect();
        write_wav(
            rir_dir.join(format!("{id}_src{k}.wav")),
            &MultichannelWaveform::new(channels)?,
            WavEncoding::Float32,
        )?;
    }
    Ok(())
}
