//! Extended short-time objective intelligibility.
//!
//! Pipeline: polyphase resample to 10 kHz, drop silent frames (40 dB below
//! the loudest clean frame), 256-sample Hann STFT with 50% overlap, 15
//! one-third-octave bands from 150 Hz, then for every sliding 384 ms
//! segment (30 frames) row- and column-normalize the band-energy matrices
//! of clean and degraded speech and average the column correlations.
//! Scores live in [-1, 1]; identical inputs give 1.

use num_complex::Complex64;
use rustfft::FftPlanner;

use super::MetricError;
use crate::signals::Waveform;

const ESTOI_FS: f64 = 10_000.0;
const WIN: usize = 256;
const HOP: usize = 128;
const FFT: usize = 512;
const N_BANDS: usize = 15;
const LOWEST_BAND_HZ: f64 = 150.0;
const SEGMENT_FRAMES: usize = 30;
const DYN_RANGE_DB: f64 = 40.0;

/// ESTOI score of a degraded signal against clean reference speech.
/// Inputs are 16 kHz; both are resampled internally.
pub fn estoi(degraded: &Waveform, clean: &Waveform) -> Result<f64, MetricError> {
    if degraded.len() != clean.len() {
        return Err(MetricError::LengthMismatch {
            est: degraded.len(),
            reference: clean.len(),
        });
    }
    let x = resample_16k_to_10k(&clean.samples);
    let y = resample_16k_to_10k(&degraded.samples);
    let min_len = WIN + HOP * (SEGMENT_FRAMES + 1);
    if x.len() < min_len {
        return Err(MetricError::TooShort {
            got: x.len(),
            need: min_len,
        });
    }

    let (x, y) = remove_silent_frames(&x, &y);
    let n_frames = if x.len() >= WIN {
        (x.len() - WIN) / HOP + 1
    } else {
        0
    };
    if n_frames < SEGMENT_FRAMES {
        return Err(MetricError::TooShort {
            got: x.len(),
            need: WIN + HOP * (SEGMENT_FRAMES - 1),
        });
    }

    let bands = third_octave_bands();
    let xb = band_energies(&x, n_frames, &bands);
    let yb = band_energies(&y, n_frames, &bands);

    // Sliding segments, hop of one frame.
    let mut total = 0.0;
    let n_segments = n_frames - SEGMENT_FRAMES + 1;
    for seg in 0..n_segments {
        total += segment_correlation(&xb, &yb, seg);
    }
    Ok(total / n_segments as f64)
}

/// Row- then column-normalized correlation of one 15 x 30 segment.
fn segment_correlation(xb: &[Vec<f64>], yb: &[Vec<f64>], seg: usize) -> f64 {
    let mut xm = [[0.0f64; SEGMENT_FRAMES]; N_BANDS];
    let mut ym = [[0.0f64; SEGMENT_FRAMES]; N_BANDS];
    for b in 0..N_BANDS {
        for t in 0..SEGMENT_FRAMES {
            xm[b][t] = xb[b][seg + t];
            ym[b][t] = yb[b][seg + t];
        }
    }
    normalize_rows(&mut xm);
    normalize_rows(&mut ym);
    normalize_cols(&mut xm);
    normalize_cols(&mut ym);
    let mut acc = 0.0;
    for t in 0..SEGMENT_FRAMES {
        let mut dot = 0.0;
        for b in 0..N_BANDS {
            dot += xm[b][t] * ym[b][t];
        }
        acc += dot;
    }
    acc / SEGMENT_FRAMES as f64
}

fn normalize_rows(m: &mut [[f64; SEGMENT_FRAMES]; N_BANDS]) {
    for row in m.iter_mut() {
        let mean = row.iter().sum::<f64>() / SEGMENT_FRAMES as f64;
        for v in row.iter_mut() {
            *v -= mean;
        }
        let norm = row.iter().map(|v| v * v).sum::<f64>().sqrt();
        if norm > 0.0 {
            for v in row.iter_mut() {
                *v /= norm;
            }
        }
    }
}

fn normalize_cols(m: &mut [[f64; SEGMENT_FRAMES]; N_BANDS]) {
    for t in 0..SEGMENT_FRAMES {
        let mean = (0..N_BANDS).map(|b| m[b][t]).sum::<f64>() / N_BANDS as f64;
        for b in 0..N_BANDS {
            m[b][t] -= mean;
        }
        let norm = (0..N_BANDS).map(|b| m[b][t] * m[b][t]).sum::<f64>().sqrt();
        if norm > 0.0 {
            for b in 0..N_BANDS {
                m[b][t] /= norm;
            }
        }
    }
}

/// One-third-octave bands as (lo, hi) FFT bin ranges at 10 kHz / 512 FFT.
fn third_octave_bands() -> Vec<(usize, usize)> {
    let hz_per_bin = ESTOI_FS / FFT as f64;
    (0..N_BANDS)
        .map(|k| {
            let center = LOWEST_BAND_HZ * 2f64.powf(k as f64 / 3.0);
            let lo_hz = center / 2f64.powf(1.0 / 6.0);
            let hi_hz = center * 2f64.powf(1.0 / 6.0);
            let lo = (lo_hz / hz_per_bin).round() as usize;
            let hi = ((hi_hz / hz_per_bin).round() as usize).min(FFT / 2);
            (lo, hi.max(lo + 1))
        })
        .collect()
}

/// Hann-windowed frame spectra reduced to per-band root energies.
/// `out[band][frame]`.
fn band_energies(x: &[f64], n_frames: usize, bands: &[(usize, usize)]) -> Vec<Vec<f64>> {
    let window: Vec<f64> = (0..WIN)
        .map(|n| 0.5 * (1.0 - (2.0 * std::f64::consts::PI * n as f64 / WIN as f64).cos()))
        .collect();
    let mut planner = FftPlanner::new();
    let fft = planner.plan_fft_forward(FFT);
    let mut out = vec![vec![0.0f64; n_frames]; bands.len()];
    let mut buf = vec![Complex64::ZERO; FFT];
    for t in 0..n_frames {
        buf.fill(Complex64::ZERO);
        for n in 0..WIN {
            buf[n] = Complex64::new(x[t * HOP + n] * window[n], 0.0);
        }
        fft.process(&mut buf);
        for (b, &(lo, hi)) in bands.iter().enumerate() {
            let e: f64 = buf[lo..hi].iter().map(|c| c.norm_sqr()).sum();
            out[b][t] = e.sqrt();
        }
    }
    out
}

/// Drops frames whose clean-speech energy is more than 40 dB below the
/// loudest frame, reconstructing both signals by overlap-add of the kept
/// frames.
fn remove_silent_frames(x: &[f64], y: &[f64]) -> (Vec<f64>, Vec<f64>) {
    if x.len() < WIN {
        return (x.to_vec(), y.to_vec());
    }
    let window: Vec<f64> = (0..WIN)
        .map(|n| 0.5 * (1.0 - (2.0 * std::f64::consts::PI * n as f64 / WIN as f64).cos()))
        .collect();
    let n_frames = (x.len() - WIN) / HOP + 1;
    let energies: Vec<f64> = (0..n_frames)
        .map(|t| {
            (0..WIN)
                .map(|n| (x[t * HOP + n] * window[n]).powi(2))
                .sum::<f64>()
        })
        .collect();
    let max_e = energies.iter().cloned().fold(0.0f64, f64::max);
    if max_e == 0.0 {
        return (x.to_vec(), y.to_vec());
    }
    let threshold = max_e * 10f64.powf(-DYN_RANGE_DB / 10.0);
    let kept: Vec<usize> = (0..n_frames).filter(|&t| energies[t] > threshold).collect();
    if kept.len() == n_frames {
        return (x.to_vec(), y.to_vec());
    }
    let out_len = if kept.is_empty() {
        0
    } else {
        (kept.len() - 1) * HOP + WIN
    };
    let mut xs = vec![0.0f64; out_len];
    let mut ys = vec![0.0f64; out_len];
    let mut env = vec![0.0f64; out_len];
    for (k, &t) in kept.iter().enumerate() {
        for n in 0..WIN {
            xs[k * HOP + n] += x[t * HOP + n] * window[n];
            ys[k * HOP + n] += y[t * HOP + n] * window[n];
            env[k * HOP + n] += window[n];
        }
    }
    for i in 0..out_len {
        if env[i] > 1e-12 {
            xs[i] /= env[i];
            ys[i] /= env[i];
        }
    }
    (xs, ys)
}

/// Polyphase 5/8 resampler (16 kHz to 10 kHz) with a Hann-windowed sinc
/// anti-aliasing filter.
fn resample_16k_to_10k(x: &[f64]) -> Vec<f64> {
    const UP: usize = 5;
    const DOWN: usize = 8;
    // Lowpass at pi/8 of the upsampled rate, 8 zero crossings per side.
    const HALF: usize = 64; // taps per side at the upsampled rate
    let cutoff = 1.0 / DOWN as f64;
    let kernel = |t: f64| -> f64 {
        if t.abs() >= HALF as f64 {
            return 0.0;
        }
        let w = 0.5 * (1.0 + (std::f64::consts::PI * t / HALF as f64).cos());
        let a = std::f64::consts::PI * t * cutoff;
        let sinc = if a.abs() < 1e-12 { 1.0 } else { a.sin() / a };
        cutoff * sinc * w
    };
    let out_len = x.len() * UP / DOWN;
    let mut out = vec![0.0f64; out_len];
    for (m, o) in out.iter_mut().enumerate() {
        // Output sample m sits at upsampled position m*DOWN; input sample n
        // sits at n*UP.
        let pos = (m * DOWN) as f64;
        let n_lo = ((pos - HALF as f64) / UP as f64).ceil() as isize;
        let n_hi = ((pos + HALF as f64) / UP as f64).floor() as isize;
        let mut acc = 0.0;
        for n in n_lo..=n_hi {
            if n < 0 || n as usize >= x.len() {
                continue;
            }
            acc += x[n as usize] * kernel(pos - (n as usize * UP) as f64);
        }
        *o = acc * UP as f64;
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::synth::speech_like;

    fn white(len: usize, seed: u64, amp: f64) -> Waveform {
        let mut state = seed.max(1);
        Waveform::pipeline(
            (0..len)
                .map(|_| {
                    state ^= state << 13;
                    state ^= state >> 7;
                    state ^= state << 17;
                    ((state >> 11) as f64 / (1u64 << 52) as f64 - 1.0) * amp
                })
                .collect(),
        )
    }

    #[test]
    fn resampler_preserves_tone_frequency() {
        // A 1 kHz tone at 16 kHz stays a 1 kHz tone at 10 kHz.
        let x: Vec<f64> = (0..16_000)
            .map(|n| (2.0 * std::f64::consts::PI * 1000.0 * n as f64 / 16_000.0).sin())
            .collect();
        let y = resample_16k_to_10k(&x);
        assert_eq!(y.len(), 10_000);
        // Zero-crossing count approximates frequency.
        let crossings = y
            .windows(2)
            .filter(|w| (w[0] >= 0.0) != (w[1] >= 0.0))
            .count();
        let freq = crossings as f64 * ESTOI_FS / (2.0 * y.len() as f64);
        assert!((freq - 1000.0).abs() < 20.0, "freq {freq}");
        // Amplitude roughly preserved away from edges.
        let peak = y[1000..9000].iter().cloned().fold(0.0f64, f64::max);
        assert!((peak - 1.0).abs() < 0.05, "peak {peak}");
    }

    #[test]
    fn identical_signals_score_one() {
        let x = speech_like(3, 32_000, 0.05);
        let v = estoi(&x, &x).unwrap();
        assert!((v - 1.0).abs() < 1e-6, "{v}");
    }

    #[test]
    fn unrelated_noise_scores_low() {
        for seed in 0..20u64 {
            let clean = speech_like(100 + seed, 32_000, 0.05);
            let noise = white(32_000, 500 + seed, 0.05);
            let v = estoi(&noise, &clean).unwrap();
            assert!(v < 0.1, "seed {seed}: {v}");
        }
    }

    #[test]
    fn monotone_under_increasing_noise() {
        let clean = speech_like(42, 48_000, 0.05);
        let noise = white(48_000, 77, 1.0);
        let clean_rms = clean.rms();
        let mut prev = f64::INFINITY;
        for snr_db in [20.0f64, 10.0, 0.0, -10.0] {
            let noise_rms = clean_rms / 10f64.powf(snr_db / 20.0);
            let gain = noise_rms / noise.rms();
            let noisy = Waveform::pipeline(
                clean
                    .samples
                    .iter()
                    .zip(noise.samples.iter())
                    .map(|(c, n)| c + gain * n)
                    .collect(),
            );
            let v = estoi(&noisy, &clean).unwrap();
            assert!(v <= prev + 1e-9, "snr {snr_db}: {v} > {prev}");
            assert!((-1.0..=1.0).contains(&v));
            prev = v;
        }
        assert!(prev < 0.6, "heavy noise should degrade ESTOI, got {prev}");
    }

    #[test]
    fn too_short_input_rejected() {
        let x = white(1000, 3, 0.1);
        assert!(matches!(
            estoi(&x, &x),
            Err(MetricError::TooShort { .. })
        ));
    }
}
