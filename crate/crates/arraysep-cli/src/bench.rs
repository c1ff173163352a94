//! Assignment-cost benchmark: exact operation counters plus wall-time
//! medians for the permutation scan versus location-based pairing.

use std::time::Instant;

use serde::{Deserialize, Serialize};

use arraysep::criteria::{self, Criterion};
use arraysep::signals::{ComplexSpectrogram, StftConfig};

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct BenchEntry {
    pub n_speakers: usize,
    pub pit_permutations_scanned: usize,
    pub pit_pairwise_evals: usize,
    pub lbt_pairwise_evals: usize,
    pub pit_median_ns: u128,
    pub lbt_median_ns: u128,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct BenchReport {
    pub spectrogram_frames: usize,
    pub spectrogram_bins: usize,
    pub repetitions: usize,
    pub entries: Vec<BenchEntry>,
}

impl BenchReport {
    /// Wall-time ratio permutation-scan / location-based per speaker
    /// count.
    pub fn ratios(&self) -> Vec<(usize, f64)> {
        self.entries
            .iter()
            .map(|e| {
                (
                    e.n_speakers,
                    e.pit_median_ns as f64 / e.lbt_median_ns.max(1) as f64,
                )
            })
            .collect()
    }
}

fn dummy_specs(n: usize, frames: usize, bins: usize, seed: u64) -> Vec<ComplexSpectrogram> {
    let cfg = StftConfig::default();
    let mut state = seed.max(1);
    (0..n)
        .map(|_| {
            let mut s = ComplexSpectrogram::zeros(frames, bins, &cfg);
            for b in s.bins.iter_mut() {
                state ^= state << 13;
                state ^= state >> 7;
                state ^= state << 17;
                let re = (state >> 11) as f64 / (1u64 << 52) as f64 - 1.0;
                state ^= state << 13;
                state ^= state >> 7;
                state ^= state << 17;
                let im = (state >> 11) as f64 / (1u64 << 52) as f64 - 1.0;
                *b = num_complex::Complex64::new(re, im);
            }
            s
        })
        .collect()
}

fn median(mut xs: Vec<u128>) -> u128 {
    xs.sort_unstable();
    xs[xs.len() / 2]
}

/// Times both assignment strategies on fixed-size dummy spectrograms for
/// every speaker count up to `max_n`.
pub fn run_bench(max_n: usize, repetitions: usize) -> BenchReport {
    let (frames, bins) = (24, 64);
    let mut entries = Vec::new();
    for n in 1..=max_n.min(criteria::MAX_PIT_SPEAKERS) {
        let s_hats = dummy_specs(n, frames, bins, 1000 + n as u64);
        let targets = dummy_specs(n, frames, bins, 2000 + n as u64);
        let order: Vec<usize> = (0..n).rev().collect();

        let pit_report = criteria::pit_assign(&s_hats, &targets, criteria::loss_ri_mag).unwrap();
        let lbt_report = criteria::lbt_assign(
            &s_hats,
            &targets,
            &order,
            Criterion::Azimuth,
            criteria::loss_ri_mag,
        )
        .unwrap();

        let mut pit_times = Vec::with_capacity(repetitions);
        let mut lbt_times = Vec::with_capacity(repetitions);
        for _ in 0..repetitions {
            let t0 = Instant::now();
            let r = criteria::pit_assign(&s_hats, &targets, criteria::loss_ri_mag).unwrap();
            pit_times.push(t0.elapsed().as_nanos());
            std::hint::black_box(r.total_loss);

            let t0 = Instant::now();
            let r = criteria::lbt_assign(
                &s_hats,
                &targets,
                &order,
                Criterion::Azimuth,
                criteria::loss_ri_mag,
            )
            .unwrap();
            lbt_times.push(t0.elapsed().as_nanos());
            std::hint::black_box(r.total_loss);
        }
        entries.push(BenchEntry {
            n_speakers: n,
            pit_permutations_scanned: pit_report.permutations_scanned,
            pit_pairwise_evals: pit_report.pairwise_evals,
            lbt_pairwise_evals: lbt_report.pairwise_evals,
            pit_median_ns: median(pit_times),
            lbt_median_ns: median(lbt_times),
        });
    }
    BenchReport {
        spectrogram_frames: frames,
        spectrogram_bins: bins,
        repetitions,
        entries,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn counters_are_exact() {
        let report = run_bench(5, 3);
        for e in &report.entries {
            let n = e.n_speakers;
            let factorial: usize = (1..=n).product();
            assert_eq!(e.pit_permutations_scanned, factorial);
            assert_eq!(e.pit_pairwise_evals, n * n);
            assert_eq!(e.lbt_pairwise_evals, n);
        }
        assert_eq!(report.entries.len(), 5);
    }
}
