//! JSONL dataset manifests.
//!
//! One JSON object per line, each describing a spatialized example: its
//! scene (full geometry, seed, T60), utterance ids, and the WAV paths of
//! the mixture and per-speaker targets. Commands never read audio that is
//! not listed in their manifest.

use std::io::{BufRead, BufReader, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::acoustics::Scenario;

#[derive(Error, Debug)]
pub enum DatasetError {
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error("manifest line {line}: {source}")]
    BadRecord {
        line: usize,
        source: serde_json::Error,
    },
    #[error("manifest entry {id}: {reason}")]
    Inconsistent { id: String, reason: String },
}

/// One dataset example.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ManifestEntry {
    pub id: String,
    pub seed: u64,
    pub config_hash: String,
    pub scenario: Scenario,
    pub utterance_ids: Vec<String>,
    pub mixture_wav: String,
    pub target_wavs: Vec<String>,
}

impl ManifestEntry {
    /// Basic internal consistency: one target per speaker.
    pub fn validate(&self) -> Result<(), DatasetError> {
        if self.target_wavs.len() != self.scenario.n_speakers() {
            return Err(DatasetError::Inconsistent {
                id: self.id.clone(),
                reason: format!(
                    "{} targets for {} speakers",
                    self.target_wavs.len(),
                    self.scenario.n_speakers()
                ),
            });
        }
        Ok(())
    }
}

/// Parses a single manifest line.
pub fn parse_manifest_line(line: &str) -> Result<ManifestEntry, serde_json::Error> {
    serde_json::from_str(line)
}

/// Reads a JSONL manifest, skipping blank lines.
pub fn read_manifest(path: impl AsRef<Path>) -> Result<Vec<ManifestEntry>, DatasetError> {
    let file = std::fs::File::open(path)?;
    let mut entries = Vec::new();
    for (i, line) in BufReader::new(file).lines().enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let entry = parse_manifest_line(&line)
            .map_err(|source| DatasetError::BadRecord { line: i + 1, source })?;
        entry.validate()?;
        entries.push(entry);
    }
    Ok(entries)
}

/// Writes a JSONL manifest.
pub fn write_manifest(
    path: impl AsRef<Path>,
    entries: &[ManifestEntry],
) -> Result<(), DatasetError> {
    let mut file = std::fs::File::create(path)?;
    for e in entries {
        let line = serde_json::to_string(e).expect("manifest entries are serializable");
        writeln!(file, "{line}")?;
    }
    Ok(())
}
