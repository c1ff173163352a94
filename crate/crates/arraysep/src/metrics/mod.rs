//! Separation-quality metrics: SI-SNR, SDR, ESTOI, and improvements over
//! the unprocessed mixture.

mod estoi;
mod sdr;

pub use estoi::estoi;
pub use sdr::sdr;

use itertools::Itertools;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::signals::Waveform;

#[derive(Error, Debug)]
pub enum MetricError {
    #[error("length mismatch: estimate {est} vs reference {reference}")]
    LengthMismatch { est: usize, reference: usize },
    #[error("reference signal is zero")]
    ZeroReference,
    #[error("signal too short: {got} samples, need at least {need}")]
    TooShort { got: usize, need: usize },
    #[error("count mismatch: {estimates} estimates vs {targets} targets")]
    CountMismatch { estimates: usize, targets: usize },
}

/// dB clamp keeping aggregates finite on exact matches.
pub const METRIC_CLAMP_DB: f64 = 60.0;
/// Default SDR projection filter length in taps.
pub const SDR_FILTER_LEN: usize = 512;

fn clamp_db(x: f64) -> f64 {
    if x.is_nan() {
        -METRIC_CLAMP_DB
    } else {
        x.clamp(-METRIC_CLAMP_DB, METRIC_CLAMP_DB)
    }
}

/// Scale-invariant signal-to-noise ratio in dB, clamped to +-60.
///
/// Both signals are mean-removed; the target component is the projection
/// of the estimate onto the reference.
pub fn si_snr(est: &Waveform, reference: &Waveform) -> Result<f64, MetricError> {
    if est.len() != reference.len() {
        return Err(MetricError::LengthMismatch {
            est: est.len(),
            reference: reference.len(),
        });
    }
    if reference.energy() == 0.0 {
        return Err(MetricError::ZeroReference);
    }
    let n = est.len() as f64;
    let me = est.samples.iter().sum::<f64>() / n;
    let mr = reference.samples.iter().sum::<f64>() / n;
    let mut dot = 0.0;
    let mut ref_energy = 0.0;
    for (e, r) in est.samples.iter().zip(reference.samples.iter()) {
        let (e, r) = (e - me, r - mr);
        dot += e * r;
        ref_energy += r * r;
    }
    if ref_energy == 0.0 {
        return Err(MetricError::ZeroReference);
    }
    let alpha = dot / ref_energy;
    let mut target_energy = 0.0;
    let mut error_energy = 0.0;
    for (e, r) in est.samples.iter().zip(reference.samples.iter()) {
        let (e, r) = (e - me, r - mr);
        let t = alpha * r;
        target_energy += t * t;
        error_energy += (e - t) * (e - t);
    }
    Ok(clamp_db(10.0 * (target_energy / error_energy).log10()))
}

/// Which output-target pairing the metrics were computed under.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ScoringPolicy {
    /// Score output n against target n: validates location-based output
    /// ordering end to end.
    Fixed,
    /// Score under the permutation maximizing mean SI-SNR: the standard
    /// policy for permutation-invariant systems.
    BestPermutation,
}

/// Metric values for one speaker.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SpeakerScores {
    pub si_snr_db: f64,
    pub sdr_db: f64,
    pub estoi: f64,
    /// Improvements over scoring the unprocessed mixture as the estimate.
    pub delta_si_snr_db: f64,
    pub delta_sdr_db: f64,
    pub delta_estoi: f64,
}

/// Scores for a full example.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalRecord {
    pub scoring: ScoringPolicy,
    /// `pairing[n]` is the target index scored against output n.
    pub pairing: Vec<usize>,
    pub speakers: Vec<SpeakerScores>,
}

impl EvalRecord {
    pub fn mean_si_snr(&self) -> f64 {
        self.speakers.iter().map(|s| s.si_snr_db).sum::<f64>() / self.speakers.len() as f64
    }

    pub fn mean(&self, get: impl Fn(&SpeakerScores) -> f64) -> f64 {
        self.speakers.iter().map(&get).sum::<f64>() / self.speakers.len() as f64
    }
}

/// Evaluates estimates against targets under the chosen scoring policy.
/// Delta metrics compare against the mixture reference channel used as
/// the estimate for every speaker.
pub fn eval_example(
    estimates: &[Waveform],
    targets: &[Waveform],
    mixture_ref: &Waveform,
    scoring: ScoringPolicy,
) -> Result<EvalRecord, MetricError> {
    if estimates.len() != targets.len() {
        return Err(MetricError::CountMismatch {
            estimates: estimates.len(),
            targets: targets.len(),
        });
    }
    if estimates.is_empty() {
        return Err(MetricError::CountMismatch {
            estimates: 0,
            targets: 0,
        });
    }
    let n = estimates.len();
    let pairing: Vec<usize> = match scoring {
        ScoringPolicy::Fixed => (0..n).collect(),
        ScoringPolicy::BestPermutation => {
            let mut best: Option<(f64, Vec<usize>)> = None;
            for perm in (0..n).permutations(n) {
                let mut total = 0.0;
                for (out, &t) in perm.iter().enumerate() {
                    total += si_snr(&estimates[out], &targets[t])?;
                }
                if best.as_ref().is_none_or(|(b, _)| total > *b) {
                    best = Some((total, perm));
                }
            }
            best.unwrap().1
        }
    };

    let mut speakers = Vec::with_capacity(n);
    for (out, &t) in pairing.iter().enumerate() {
        let target = &targets[t];
        let si = si_snr(&estimates[out], target)?;
        let sd = sdr(&estimates[out], target, SDR_FILTER_LEN)?;
        let es = estoi(&estimates[out], target)?;
        let si0 = si_snr(mixture_ref, target)?;
        let sd0 = sdr(mixture_ref, target, SDR_FILTER_LEN)?;
        let es0 = estoi(mixture_ref, target)?;
        speakers.push(SpeakerScores {
            si_snr_db: si,
            sdr_db: sd,
            estoi: es,
            delta_si_snr_db: si - si0,
            delta_sdr_db: sd - sd0,
            delta_estoi: es - es0,
        });
    }
    Ok(EvalRecord {
        scoring,
        pairing,
        speakers,
    })
}
