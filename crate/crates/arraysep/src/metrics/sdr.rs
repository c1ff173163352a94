//! Signal-to-distortion ratio in the single-source projection style.
//!
//! The target subspace is spanned by delayed copies of the reference: a
//! least-squares FIR filter (512 taps by default) maps the reference onto
//! the estimate, and SDR compares projection energy against the residual.
//! Projection and scoring run over the window where the filter has full
//! history, so a pure delay below the filter length is absorbed exactly.
//! The Gram matrix is assembled from one correlation row via the Toeplitz
//! shift identity and solved by Cholesky with a small diagonal
//! regularizer; tests check against an independent dense solver.

use super::{clamp_db, MetricError};
use crate::signals::Waveform;

/// SDR in dB, clamped to +-60. `filter_len` bounds the delay/coloration
/// the projection can absorb.
pub fn sdr(est: &Waveform, reference: &Waveform, filter_len: usize) -> Result<f64, MetricError> {
    if est.len() != reference.len() {
        return Err(MetricError::LengthMismatch {
            est: est.len(),
            reference: reference.len(),
        });
    }
    if reference.energy() == 0.0 {
        return Err(MetricError::ZeroReference);
    }
    let n = est.len();
    let taps = filter_len.clamp(1, n / 2);
    let window = taps - 1..n;
    let h = projection_filter(&reference.samples, &est.samples, taps, window.clone());

    let mut proj_energy = 0.0;
    let mut err_energy = 0.0;
    for i in window {
        let mut p = 0.0;
        for (k, hk) in h.iter().enumerate() {
            p += hk * reference.samples[i - k];
        }
        proj_energy += p * p;
        let e = est.samples[i] - p;
        err_energy += e * e;
    }
    Ok(clamp_db(10.0 * (proj_energy / err_energy).log10()))
}

/// Least-squares FIR mapping `reference` onto `est` over the given sample
/// window: solves `(G + lambda I) h = c` with `G[k][l] = sum_i r[i-k] r[i-l]`
/// and `c[k] = sum_i est[i] r[i-k]`, both summed over the window.
fn projection_filter(
    reference: &[f64],
    est: &[f64],
    taps: usize,
    window: std::ops::Range<usize>,
) -> Vec<f64> {
    let (lo, hi) = (window.start, window.end);
    // First row of the Gram matrix, then the shift identity
    // G[k+1][l+1] = G[k][l] - r[hi-1-k] r[hi-1-l] + r[lo-1-k] r[lo-1-l].
    let mut gram = vec![vec![0.0f64; taps]; taps];
    for l in 0..taps {
        let mut acc = 0.0;
        for i in lo..hi {
            acc += reference[i] * reference[i - l];
        }
        gram[0][l] = acc;
        gram[l][0] = acc;
    }
    for k in 1..taps {
        for l in k..taps {
            let v = gram[k - 1][l - 1] - reference[hi - k] * reference[hi - l]
                + reference[lo - k] * reference[lo - l];
            gram[k][l] = v;
            gram[l][k] = v;
        }
    }
    for (k, row) in gram.iter_mut().enumerate() {
        row[k] += 1e-10;
    }
    let mut rhs = vec![0.0f64; taps];
    for (k, c) in rhs.iter_mut().enumerate() {
        let mut acc = 0.0;
        for i in lo..hi {
            acc += est[i] * reference[i - k];
        }
        *c = acc;
    }
    cholesky_solve(&mut gram, &rhs)
}

/// In-place Cholesky factorization and solve for a symmetric positive
/// definite system.
fn cholesky_solve(a: &mut [Vec<f64>], b: &[f64]) -> Vec<f64> {
    let n = b.len();
    for j in 0..n {
        let mut d = a[j][j];
        for k in 0..j {
            d -= a[j][k] * a[j][k];
        }
        let d = d.max(1e-300).sqrt();
        a[j][j] = d;
        for i in j + 1..n {
            let mut v = a[i][j];
            for k in 0..j {
                v -= a[i][k] * a[j][k];
            }
            a[i][j] = v / d;
        }
    }
    // Forward then backward substitution.
    let mut y = b.to_vec();
    for i in 0..n {
        for k in 0..i {
            y[i] -= a[i][k] * y[k];
        }
        y[i] /= a[i][i];
    }
    for i in (0..n).rev() {
        for k in i + 1..n {
            y[i] -= a[k][i] * y[k];
        }
        y[i] /= a[i][i];
    }
    y
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::metrics::METRIC_CLAMP_DB;

    fn noise(len: usize, seed: u64) -> Waveform {
        let mut state = seed.max(1);
        Waveform::pipeline(
            (0..len)
                .map(|_| {
                    state ^= state << 13;
                    state ^= state >> 7;
                    state ^= state << 17;
                    ((state >> 11) as f64 / (1u64 << 52) as f64 - 1.0) * 0.4
                })
                .collect(),
        )
    }

    #[test]
    fn cholesky_matches_dense_lu() {
        for seed in 1..6u64 {
            let x = noise(64, seed);
            let n = 12;
            let mut g = vec![vec![0.0f64; n]; n];
            for k in 0..n {
                for l in 0..n {
                    let mut acc = 0.0;
                    for i in n..x.len() {
                        acc += x.samples[i - k] * x.samples[i - l];
                    }
                    g[k][l] = acc;
                }
                g[k][k] += 1e-10;
            }
            let b: Vec<f64> = (0..n).map(|i| (i as f64 * 0.37).sin()).collect();
            let dense = nalgebra::DMatrix::from_fn(n, n, |i, j| g[i][j]);
            let got = cholesky_solve(&mut g, &b);
            let rhs = nalgebra::DVector::from_column_slice(&b);
            let want = dense.lu().solve(&rhs).unwrap();
            for i in 0..n {
                assert!(
                    (got[i] - want[i]).abs() < 1e-8 * want.amax().max(1.0),
                    "seed {seed} tap {i}: {} vs {}",
                    got[i],
                    want[i]
                );
            }
        }
    }

    #[test]
    fn identical_signals_clamp() {
        let x = noise(4000, 3);
        assert_eq!(sdr(&x, &x, 512).unwrap(), METRIC_CLAMP_DB);
    }

    #[test]
    fn delay_absorbed_by_projection() {
        let x = noise(6000, 5);
        for delay in [1usize, 17, 100, 500] {
            let delayed = Waveform::pipeline(
                std::iter::repeat_n(0.0, delay)
                    .chain(x.samples.iter().copied())
                    .take(x.len())
                    .collect(),
            );
            let v = sdr(&delayed, &x, 512).unwrap();
            assert!(v >= 59.0, "delay {delay}: {v} dB");
        }
    }

    #[test]
    fn matches_dense_least_squares_oracle() {
        // Independent route: explicit design matrix and LU on the normal
        // equations via nalgebra.
        let reference = noise(2000, 7);
        let est = Waveform::pipeline(
            reference
                .samples
                .iter()
                .zip(noise(2000, 8).samples.iter())
                .map(|(r, n)| 0.8 * r + 0.3 * n)
                .collect(),
        );
        let taps = 64;
        let got = sdr(&est, &reference, taps).unwrap();

        let n = est.len();
        let rows = n - (taps - 1);
        let a = nalgebra::DMatrix::from_fn(rows, taps, |i, k| reference.samples[taps - 1 + i - k]);
        let y = nalgebra::DVector::from_fn(rows, |i, _| est.samples[taps - 1 + i]);
        let gram = a.transpose() * &a + nalgebra::DMatrix::identity(taps, taps) * 1e-10;
        let rhs = a.transpose() * &y;
        let h = gram.lu().solve(&rhs).unwrap();
        let proj = a * h;
        let err = &y - &proj;
        let want = 10.0 * (proj.norm_squared() / err.norm_squared()).log10();
        assert!((got - want).abs() < 0.01, "{got} vs {want}");
    }

    #[test]
    fn lowpassed_estimate_scores_mid_range() {
        // Causal coloration within the filter span is absorbed; additive
        // noise is not.
        let reference = noise(4000, 11);
        let smooth: Vec<f64> = (0usize..4000)
            .map(|i| {
                let lo = i.saturating_sub(2);
                let w = &reference.samples[lo..=i];
                w.iter().sum::<f64>() / 3.0
            })
            .collect();
        let est = Waveform::pipeline(
            smooth
                .iter()
                .zip(noise(4000, 12).samples.iter())
                .map(|(s, n)| s + 0.01 * n)
                .collect(),
        );
        let v = sdr(&est, &reference, 512).unwrap();
        assert!(v > 20.0 && v < 59.0, "{v} dB");
    }

    #[test]
    fn zero_reference_rejected() {
        let z = Waveform::pipeline(vec![0.0; 100]);
        let x = noise(100, 2);
        assert!(matches!(sdr(&x, &z, 16), Err(MetricError::ZeroReference)));
    }
}
