//! Training criteria: the pairwise RI+Mag loss and the output-speaker
//! assignment strategies.
//!
//! Permutation-invariant assignment scans every output-speaker permutation
//! for the minimum total loss; location-based assignment pairs output `n`
//! with the speaker that is n-th in the azimuth (or distance) order, which
//! needs exactly one loss evaluation per output. Both report their exact
//! evaluation counts, making the factorial-vs-linear complexity gap a
//! testable quantity rather than a claim.

use itertools::Itertools;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::signals::ComplexSpectrogram;

#[derive(Error, Debug)]
pub enum CriterionError {
    #[error("output/speaker count mismatch: {outputs} outputs vs {speakers} speakers")]
    CountMismatch { outputs: usize, speakers: usize },
    #[error("speaker count {0} above the factorial guard ({MAX_PIT_SPEAKERS})")]
    TooManySpeakers(usize),
    #[error("order {0:?} is not a permutation of 0..{1}")]
    InvalidPermutation(Vec<usize>, usize),
    #[error("dynamic selection needs at least 2 azimuth estimates, got {0}")]
    NotEnoughEstimates(usize),
    #[error("empty input")]
    Empty,
}

/// Factorial guard for the permutation scan.
pub const MAX_PIT_SPEAKERS: usize = 8;

/// Which assignment strategy produced a pairing.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Criterion {
    Pit,
    Azimuth,
    Distance,
    Combined,
}

impl std::fmt::Display for Criterion {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        let s = match self {
            Criterion::Pit => "pit",
            Criterion::Azimuth => "azimuth",
            Criterion::Distance => "distance",
            Criterion::Combined => "combined",
        };
        f.write_str(s)
    }
}

/// An output-to-speaker pairing: output `n` is scored against speaker
/// `pairing[n]`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Assignment {
    pub pairing: Vec<usize>,
    pub criterion: Criterion,
}

/// Result of one assignment evaluation, with exact operation counts.
#[derive(Debug, Clone, PartialEq)]
pub struct CriterionReport {
    pub total_loss: f64,
    pub assignment: Assignment,
    /// Number of pairwise loss evaluations performed (N^2 for the
    /// permutation scan's matrix, N for location-based pairing).
    pub pairwise_evals: usize,
    /// Number of permutations examined (N! for the scan, 1 otherwise).
    pub permutations_scanned: usize,
    /// Loss of each (output, assigned speaker) pair, in output order.
    pub per_pair_losses: Vec<f64>,
}

impl CriterionReport {
    /// JSON form used by the experiment harness; the pairing is 1-based.
    pub fn to_json(&self) -> serde_json::Value {
        serde_json::json!({
            "total_loss": self.total_loss,
            "criterion": self.assignment.criterion,
            "pairing": self.assignment.pairing.iter().map(|p| p + 1).collect::<Vec<_>>(),
            "pairwise_evals": self.pairwise_evals,
            "permutations_scanned": self.permutations_scanned,
            "per_pair_losses": self.per_pair_losses,
        })
    }
}

fn check_shapes(
    s_hats: &[ComplexSpectrogram],
    ss: &[ComplexSpectrogram],
) -> Result<(), CriterionError> {
    if s_hats.is_empty() {
        return Err(CriterionError::Empty);
    }
    if s_hats.len() != ss.len() {
        return Err(CriterionError::CountMismatch {
            outputs: s_hats.len(),
            speakers: ss.len(),
        });
    }
    Ok(())
}

/// L1 distance between real and imaginary parts, mean-reduced over the
/// time-frequency grid.
pub fn loss_ri(s_hat: &ComplexSpectrogram, s: &ComplexSpectrogram) -> f64 {
    debug_assert!(s_hat.same_shape(s), "loss_ri shape mismatch");
    let n = s_hat.bins.len() as f64;
    let sum: f64 = s_hat
        .bins
        .iter()
        .zip(s.bins.iter())
        .map(|(a, b)| (a.re - b.re).abs() + (a.im - b.im).abs())
        .sum();
    sum / n
}

/// [`loss_ri`] plus an L1 magnitude term with the same mean reduction.
pub fn loss_ri_mag(s_hat: &ComplexSpectrogram, s: &ComplexSpectrogram) -> f64 {
    debug_assert!(s_hat.same_shape(s), "loss_ri_mag shape mismatch");
    let n = s_hat.bins.len() as f64;
    let mag: f64 = s_hat
        .bins
        .iter()
        .zip(s.bins.iter())
        .map(|(a, b)| (a.norm() - b.norm()).abs())
        .sum();
    loss_ri(s_hat, s) + mag / n
}

/// Permutation-invariant assignment over precomputed pairwise losses.
/// `matrix[n][m]` is the loss of output `n` against speaker `m`. Ties go
/// to the lexicographically smallest permutation; the scan enumerates
/// permutations in lexicographic order and keeps strict improvements.
pub fn pit_assign_from_matrix(matrix: &[Vec<f64>]) -> Result<CriterionReport, CriterionError> {
    let n = matrix.len();
    if n == 0 {
        return Err(CriterionError::Empty);
    }
    if n > MAX_PIT_SPEAKERS {
        return Err(CriterionError::TooManySpeakers(n));
    }
    let mut best: Option<(f64, Vec<usize>)> = None;
    let mut permutations_scanned = 0usize;
    for perm in (0..n).permutations(n) {
        permutations_scanned += 1;
        let total: f64 = perm.iter().enumerate().map(|(out, &spk)| matrix[out][spk]).sum();
        if best.as_ref().is_none_or(|(b, _)| total < *b) {
            best = Some((total, perm));
        }
    }
    let (_, pairing) = best.unwrap();
    let per_pair_losses: Vec<f64> = pairing
        .iter()
        .enumerate()
        .map(|(out, &spk)| matrix[out][spk])
        .collect();
    // The reported loss is the per-speaker mean, matching the reduction
    // convention of the location-based path.
    let total_loss = per_pair_losses.iter().sum::<f64>() / n as f64;
    Ok(CriterionReport {
        total_loss,
        assignment: Assignment {
            pairing,
            criterion: Criterion::Pit,
        },
        pairwise_evals: n * n,
        permutations_scanned,
        per_pair_losses,
    })
}

/// Permutation-invariant training assignment: builds the N x N pairwise
/// loss matrix once (N^2 evaluations) and scans all N! permutations.
pub fn pit_assign(
    s_hats: &[ComplexSpectrogram],
    ss: &[ComplexSpectrogram],
    pairwise_loss: impl Fn(&ComplexSpectrogram, &ComplexSpectrogram) -> f64,
) -> Result<CriterionReport, CriterionError> {
    check_shapes(s_hats, ss)?;
    let n = s_hats.len();
    if n > MAX_PIT_SPEAKERS {
        return Err(CriterionError::TooManySpeakers(n));
    }
    let matrix: Vec<Vec<f64>> = s_hats
        .iter()
        .map(|sh| ss.iter().map(|s| pairwise_loss(sh, s)).collect())
        .collect();
    pit_assign_from_matrix(&matrix)
}

fn validate_order(order: &[usize], n: usize) -> Result<(), CriterionError> {
    let mut seen = vec![false; n];
    let valid = order.len() == n
        && order.iter().all(|&s| {
            if s >= n || seen[s] {
                false
            } else {
                seen[s] = true;
                true
            }
        });
    if !valid {
        return Err(CriterionError::InvalidPermutation(order.to_vec(), n));
    }
    Ok(())
}

/// Location-based assignment from per-pair losses already evaluated for
/// the geometric order: `pair_losses[n]` is the loss of output `n` against
/// speaker `order[n]`.
pub fn lbt_report_from_losses(
    pair_losses: Vec<f64>,
    order: &[usize],
    criterion: Criterion,
) -> CriterionReport {
    let n = pair_losses.len();
    CriterionReport {
        total_loss: pair_losses.iter().sum::<f64>() / n as f64,
        assignment: Assignment {
            pairing: order.to_vec(),
            criterion,
        },
        pairwise_evals: n,
        permutations_scanned: 1,
        per_pair_losses: pair_losses,
    }
}

/// Location-based training assignment: output `n` is paired with speaker
/// `order[n]` (the n-th speaker in the azimuth or distance sort from
/// [`crate::acoustics::geometry_truth`]); exactly N loss evaluations.
pub fn lbt_assign(
    s_hats: &[ComplexSpectrogram],
    ss: &[ComplexSpectrogram],
    order: &[usize],
    criterion: Criterion,
    pairwise_loss: impl Fn(&ComplexSpectrogram, &ComplexSpectrogram) -> f64,
) -> Result<CriterionReport, CriterionError> {
    check_shapes(s_hats, ss)?;
    validate_order(order, s_hats.len())?;
    let pair_losses: Vec<f64> = s_hats
        .iter()
        .zip(order.iter())
        .map(|(sh, &spk)| pairwise_loss(sh, &ss[spk]))
        .collect();
    Ok(lbt_report_from_losses(pair_losses, order, criterion))
}

/// Circular angular difference in degrees, in [0, 180].
pub fn circular_diff(a: f64, b: f64) -> f64 {
    let d = (a - b).rem_euclid(360.0);
    d.min(360.0 - d)
}

/// Dynamic criterion selection: azimuth-based training when the smallest
/// estimated pairwise azimuth gap exceeds the threshold (20 degrees in the
/// reference protocol), distance-based otherwise. A gap exactly at the
/// threshold selects distance ("larger than" is strict).
pub fn dynamic_select(est_azimuths: &[f64], threshold_deg: f64) -> Result<Criterion, CriterionError> {
    if est_azimuths.len() < 2 {
        return Err(CriterionError::NotEnoughEstimates(est_azimuths.len()));
    }
    let mut min_gap = f64::INFINITY;
    for i in 0..est_azimuths.len() {
        for j in i + 1..est_azimuths.len() {
            min_gap = min_gap.min(circular_diff(est_azimuths[i], est_azimuths[j]));
        }
    }
    Ok(if min_gap > threshold_deg {
        Criterion::Azimuth
    } else {
        Criterion::Distance
    })
}

/// Default azimuth-gap threshold for dynamic selection, degrees.
pub const SELECTION_THRESHOLD_DEG: f64 = 20.0;

#[cfg(test)]
mod tests {
    use super::*;
    use num_complex::Complex64;
    use proptest::prelude::*;

    fn spec_from(vals: &[Complex64], n_frames: usize, n_bins: usize) -> ComplexSpectrogram {
        assert_eq!(vals.len(), n_frames * n_bins);
        let cfg = crate::signals::StftConfig::default();
        let mut s = ComplexSpectrogram::zeros(n_frames, n_bins, &cfg);
        s.bins.copy_from_slice(vals);
        s
    }

    fn random_specs(n: usize, bins: usize, seed: u64) -> Vec<ComplexSpectrogram> {
        let mut state = seed.max(1);
        let mut next = move || {
            state ^= state << 13;
            state ^= state >> 7;
            state ^= state << 17;
            (state >> 11) as f64 / (1u64 << 52) as f64 - 1.0
        };
        (0..n)
            .map(|_| {
                let vals: Vec<Complex64> =
                    (0..bins).map(|_| Complex64::new(next(), next())).collect();
                spec_from(&vals, 1, bins)
            })
            .collect()
    }

    /// Re-sums per-permutation losses without the matrix factorization.
    fn brute_force_pit(
        s_hats: &[ComplexSpectrogram],
        ss: &[ComplexSpectrogram],
    ) -> (f64, Vec<usize>) {
        let n = s_hats.len();
        let mut best_loss = f64::INFINITY;
        let mut best_perm = Vec::new();
        for perm in (0..n).permutations(n) {
            let total: f64 = perm
                .iter()
                .enumerate()
                .map(|(out, &spk)| loss_ri_mag(&s_hats[out], &ss[spk]))
                .sum();
            if total < best_loss {
                best_loss = total;
                best_perm = perm;
            }
        }
        (best_loss / n as f64, best_perm)
    }

    #[test]
    fn loss_ri_zero_on_identical() {
        let s = random_specs(1, 16, 3).pop().unwrap();
        assert_eq!(loss_ri(&s, &s), 0.0);
        assert_eq!(loss_ri_mag(&s, &s), 0.0);
    }

    #[test]
    fn loss_ri_single_bin_hand_value() {
        let a = spec_from(&[Complex64::new(1.0, 0.0)], 1, 1);
        let b = spec_from(&[Complex64::new(0.0, 1.0)], 1, 1);
        assert!((loss_ri(&a, &b) - 2.0).abs() < 1e-15);
        // Magnitudes match, so the mag term adds nothing.
        assert!((loss_ri_mag(&a, &b) - 2.0).abs() < 1e-15);
    }

    #[test]
    fn pit_identity_for_one_speaker() {
        let s_hats = random_specs(1, 8, 1);
        let ss = random_specs(1, 8, 2);
        let rep = pit_assign(&s_hats, &ss, loss_ri_mag).unwrap();
        assert_eq!(rep.assignment.pairing, vec![0]);
        assert!((rep.total_loss - loss_ri_mag(&s_hats[0], &ss[0])).abs() < 1e-15);
        assert_eq!(rep.pairwise_evals, 1);
        assert_eq!(rep.permutations_scanned, 1);
    }

    #[test]
    fn pit_finds_swap() {
        let specs = random_specs(2, 12, 9);
        let s_hats = vec![specs[1].clone(), specs[0].clone()];
        let rep = pit_assign(&s_hats, &specs, loss_ri_mag).unwrap();
        assert_eq!(rep.assignment.pairing, vec![1, 0]);
        assert_eq!(rep.total_loss, 0.0);
        assert_eq!(rep.pairwise_evals, 4);
        assert_eq!(rep.permutations_scanned, 2);
    }

    #[test]
    fn pit_matches_brute_force_n3() {
        for seed in 0..50 {
            let s_hats = random_specs(3, 4, seed * 2 + 1);
            let ss = random_specs(3, 4, seed * 2 + 2);
            let rep = pit_assign(&s_hats, &ss, loss_ri_mag).unwrap();
            let (oracle_loss, oracle_perm) = brute_force_pit(&s_hats, &ss);
            assert_eq!(rep.assignment.pairing, oracle_perm);
            assert!((rep.total_loss - oracle_loss).abs() <= 1e-12 * oracle_loss.max(1.0));
            assert_eq!(rep.permutations_scanned, 6);
        }
    }

    #[test]
    fn pit_guard() {
        let s = random_specs(9, 2, 5);
        assert!(matches!(
            pit_assign(&s, &s, loss_ri_mag),
            Err(CriterionError::TooManySpeakers(9))
        ));
    }

    #[test]
    fn lbt_uses_given_order() {
        let s_hats = random_specs(2, 8, 31);
        let ss = random_specs(2, 8, 32);
        // Azimuths (90, 10): the smaller azimuth (speaker 1) goes to
        // output 0.
        let order = [1usize, 0];
        let rep = lbt_assign(&s_hats, &ss, &order, Criterion::Azimuth, loss_ri_mag).unwrap();
        assert_eq!(rep.assignment.pairing, vec![1, 0]);
        assert_eq!(rep.pairwise_evals, 2);
        let manual =
            (loss_ri_mag(&s_hats[0], &ss[1]) + loss_ri_mag(&s_hats[1], &ss[0])) / 2.0;
        assert!((rep.total_loss - manual).abs() < 1e-15);
    }

    #[test]
    fn lbt_rejects_non_permutation() {
        let s = random_specs(3, 4, 41);
        assert!(matches!(
            lbt_assign(&s, &s, &[0, 0, 1], Criterion::Distance, loss_ri_mag),
            Err(CriterionError::InvalidPermutation(_, 3))
        ));
    }

    #[test]
    fn circular_diff_cases() {
        assert!((circular_diff(10.0, 350.0) - 20.0).abs() < 1e-12);
        assert_eq!(circular_diff(77.0, 77.0), 0.0);
        assert!((circular_diff(-170.0, 175.0) - 15.0).abs() < 1e-12);
    }

    #[test]
    fn dynamic_selection_threshold() {
        assert_eq!(
            dynamic_select(&[0.0, 25.0], 20.0).unwrap(),
            Criterion::Azimuth
        );
        assert_eq!(
            dynamic_select(&[0.0, 15.0], 20.0).unwrap(),
            Criterion::Distance
        );
        // Boundary: exactly 20 selects distance.
        assert_eq!(
            dynamic_select(&[0.0, 20.0], 20.0).unwrap(),
            Criterion::Distance
        );
        assert!(matches!(
            dynamic_select(&[0.0], 20.0),
            Err(CriterionError::NotEnoughEstimates(1))
        ));
    }

    #[test]
    fn report_json_pairing_is_one_based() {
        let s_hats = random_specs(2, 4, 51);
        let ss = random_specs(2, 4, 52);
        let rep = pit_assign(&s_hats, &ss, loss_ri_mag).unwrap();
        let v = rep.to_json();
        let pairing: Vec<u64> = v["pairing"]
            .as_array()
            .unwrap()
            .iter()
            .map(|x| x.as_u64().unwrap())
            .collect();
        assert!(pairing.iter().all(|&p| p >= 1 && p <= 2));
        assert_eq!(v["pairwise_evals"], 4);
    }

    proptest! {
        #[test]
        fn loss_symmetry(seed in 1u64..5000) {
            let a = random_specs(1, 10, seed).pop().unwrap();
            let b = random_specs(1, 10, seed + 7919).pop().unwrap();
            prop_assert!((loss_ri(&a, &b) - loss_ri(&b, &a)).abs() < 1e-15);
        }

        #[test]
        fn ri_mag_dominates_ri(seed in 1u64..5000) {
            let a = random_specs(1, 10, seed).pop().unwrap();
            let b = random_specs(1, 10, seed + 104729).pop().unwrap();
            prop_assert!(loss_ri_mag(&a, &b) >= loss_ri(&a, &b));
        }

        #[test]
        fn pit_dominates_lbt(seed in 1u64..2000, n in 2usize..=5) {
            let s_hats = random_specs(n, 6, seed);
            let ss = random_specs(n, 6, seed + 15485863);
            let pit = pit_assign(&s_hats, &ss, loss_ri_mag).unwrap();
            // Any fixed order is inside the permutation set scanned by the
            // minimum, so it can never beat it.
            let order: Vec<usize> = (0..n).rev().collect();
            let lbt = lbt_assign(&s_hats, &ss, &order, Criterion::Azimuth, loss_ri_mag).unwrap();
            prop_assert!(pit.total_loss <= lbt.total_loss + 1e-15);
        }

        #[test]
        fn lbt_permutation_equivariance(seed in 1u64..2000) {
            // Permuting the target list and composing the order leaves the
            // loss unchanged.
            let n = 4usize;
            let s_hats = random_specs(n, 6, seed);
            let ss = random_specs(n, 6, seed + 32452843);
            let order = [2usize, 0, 3, 1];
            let base = lbt_assign(&s_hats, &ss, &order, Criterion::Distance, loss_ri_mag).unwrap();
            let shuffle = [3usize, 1, 0, 2]; // new[i] = old[shuffle[i]]
            let ss_shuffled: Vec<_> = shuffle.iter().map(|&i| ss[i].clone()).collect();
            let inverse = {
                let mut inv = vec![0usize; n];
                for (new_idx, &old_idx) in shuffle.iter().enumerate() {
                    inv[old_idx] = new_idx;
                }
                inv
            };
            let composed: Vec<usize> = order.iter().map(|&s| inverse[s]).collect();
            let moved = lbt_assign(&s_hats, &ss_shuffled, &composed, Criterion::Distance, loss_ri_mag).unwrap();
            prop_assert!((base.total_loss - moved.total_loss).abs() < 1e-12);
        }

        #[test]
        fn circular_diff_range_and_symmetry(a in -720.0..720.0f64, b in -720.0..720.0f64) {
            let d = circular_diff(a, b);
            prop_assert!((0.0..=180.0).contains(&d));
            prop_assert!((d - circular_diff(b, a)).abs() < 1e-9);
        }
    }
}
