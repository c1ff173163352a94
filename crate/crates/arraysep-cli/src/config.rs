//! Experiment configuration: one JSON file drives dataset simulation,
//! training, and evaluation. Every output embeds the config hash and seed
//! so runs are reproducible and attributable.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use arraysep::criteria::Criterion;
use arraysep::metrics::ScoringPolicy;
use arraysep::model::{AdamConfig, InputFeatures, SeparatorConfig};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExperimentConfig {
    pub dataset: DatasetConfig,
    pub model: ModelConfig,
    pub criterion: Criterion,
    pub training: TrainingConfig,
    pub eval: EvalConfig,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self {
            dataset: DatasetConfig::default(),
            model: ModelConfig::default(),
            criterion: Criterion::Azimuth,
            training: TrainingConfig::default(),
            eval: EvalConfig::default(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DatasetConfig {
    pub n_speakers: usize,
    pub count: usize,
    pub reverberant: bool,
    pub azimuth_resolution_deg: f64,
    pub seed: u64,
    /// Utterance length in seconds for the bundled synthetic generator.
    pub utterance_secs: f64,
    /// Directory of 16 kHz mono WAV files to use as dry speech; when
    /// absent, synthetic speech-like signals are generated.
    pub dry_dir: Option<PathBuf>,
    /// Optional bounds on the scene's minimum pairwise azimuth gap.
    pub min_gap_deg: Option<f64>,
    pub max_gap_deg: Option<f64>,
}

impl Default for DatasetConfig {
    fn default() -> Self {
        Self {
            n_speakers: 2,
            count: 100,
            reverberant: false,
            azimuth_resolution_deg: 5.0,
            seed: 42,
            utterance_secs: 1.0,
            dry_dir: None,
            min_gap_deg: None,
            max_gap_deg: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ModelConfig {
    pub n_mics: usize,
    pub depth: usize,
    pub convs_per_block: usize,
    pub growth: usize,
}

impl Default for ModelConfig {
    fn default() -> Self {
        Self {
            n_mics: 7,
            depth: 1,
            convs_per_block: 2,
            growth: 8,
        }
    }
}

impl ModelConfig {
    pub fn separator_config(&self, n_speakers: usize) -> SeparatorConfig {
        SeparatorConfig {
            n_speakers,
            n_mics: self.n_mics,
            depth: self.depth,
            convs_per_block: self.convs_per_block,
            growth: self.growth,
            n_bins: 257,
            input_features: InputFeatures::default(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TrainingConfig {
    pub steps: usize,
    pub seed: u64,
    pub lr: f64,
    pub beta1: f64,
    pub beta2: f64,
}

impl Default for TrainingConfig {
    fn default() -> Self {
        Self {
            steps: 200,
            seed: 7,
            lr: 1e-3,
            beta1: 0.9,
            beta2: 0.999,
        }
    }
}

impl TrainingConfig {
    pub fn adam(&self) -> AdamConfig {
        AdamConfig {
            lr: self.lr,
            beta1: self.beta1,
            beta2: self.beta2,
            eps: 1e-8,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EvalConfig {
    pub scoring: ScoringPolicy,
    /// Bin edges (degrees) for the azimuth-gap breakdown; consecutive
    /// edges form half-open bins.
    pub gap_bins_deg: Vec<f64>,
    /// Threshold for dynamic criterion selection in combined mode.
    pub selection_threshold_deg: f64,
}

impl Default for EvalConfig {
    fn default() -> Self {
        Self {
            scoring: ScoringPolicy::Fixed,
            gap_bins_deg: vec![0.0, 20.0, 45.0, 90.0, 180.0],
            selection_threshold_deg: 20.0,
        }
    }
}

/// Parses a config JSON string; unknown fields are rejected.
pub fn parse_config(text: &str) -> Result<ExperimentConfig, serde_json::Error> {
    serde_json::from_str(text)
}

pub fn load_config(path: impl AsRef<Path>) -> anyhow::Result<ExperimentConfig> {
    let text = std::fs::read_to_string(&path)?;
    Ok(parse_config(&text)?)
}

/// Short stable hash of the canonical config JSON.
pub fn config_hash(config: &ExperimentConfig) -> String {
    let canonical = serde_json::to_string(config).expect("config serializes");
    let digest = Sha256::digest(canonical.as_bytes());
    hex::encode(&digest[..8])
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn default_round_trip_and_hash_stability() {
        let cfg = ExperimentConfig::default();
        let text = serde_json::to_string(&cfg).unwrap();
        let back = parse_config(&text).unwrap();
        assert_eq!(back, cfg);
        assert_eq!(config_hash(&cfg), config_hash(&back));
        assert_eq!(config_hash(&cfg).len(), 16);
    }

    #[test]
    fn empty_object_is_all_defaults() {
        let cfg = parse_config("{}").unwrap();
        assert_eq!(cfg, ExperimentConfig::default());
    }

    #[test]
    fn unknown_fields_rejected() {
        assert!(parse_config("{\"dataset\": {\"bogus\": 1}}").is_err());
        assert!(parse_config("{\"bogus\": 1}").is_err());
    }

    #[test]
    fn hash_changes_with_content() {
        let a = ExperimentConfig::default();
        let mut b = a.clone();
        b.dataset.seed = 43;
        assert_ne!(config_hash(&a), config_hash(&b));
    }
}
