//! STFT analysis and weighted overlap-add synthesis.
//!
//! Framing policy: the signal is padded in front by `window_len - hop`
//! zeros and at the tail to an integer frame count, so a signal of `len`
//! samples always yields `ceil(len / hop)` frames. `istft` reverses the
//! padding and truncates to the requested length. With the default
//! square-root Hann pair this reconstructs every input sample exactly
//! (up to rounding) because synthesis divides by the accumulated
//! window-product envelope.

use num_complex::Complex64;
use rustfft::FftPlanner;

use super::{ComplexSpectrogram, SignalError, StftConfig, Waveform};

/// Analyzes a waveform into a one-sided complex spectrogram.
pub fn stft(x: &Waveform, cfg: &StftConfig) -> Result<ComplexSpectrogram, SignalError> {
    cfg.validate()?;
    if x.samples.is_empty() {
        return Err(SignalError::EmptyInput);
    }
    let lead = cfg.window_len - cfg.hop;
    let n_frames = cfg.n_frames(x.len());
    let n_bins = cfg.n_bins();
    let window = cfg.analysis_window();

    let mut planner = FftPlanner::new();
    let fft = planner.plan_fft_forward(cfg.fft_len);
    let mut buf = vec![Complex64::ZERO; cfg.fft_len];

    let mut out = ComplexSpectrogram::zeros(n_frames, n_bins, cfg);
    for t in 0..n_frames {
        buf.fill(Complex64::ZERO);
        let start = t as isize * cfg.hop as isize - lead as isize;
        for (w, sample) in buf.iter_mut().take(cfg.window_len).zip(0..) {
            let idx = start + sample;
            if idx >= 0 && (idx as usize) < x.len() {
                *w = Complex64::new(x.samples[idx as usize] * window[sample as usize], 0.0);
            }
        }
        fft.process(&mut buf);
        out.bins[t * n_bins..(t + 1) * n_bins].copy_from_slice(&buf[..n_bins]);
    }
    Ok(out)
}

/// Weighted overlap-add synthesis back to `out_len` samples.
pub fn istft(
    s: &ComplexSpectrogram,
    cfg: &StftConfig,
    out_len: usize,
) -> Result<Waveform, SignalError> {
    cfg.validate()?;
    if s.n_bins != cfg.n_bins() || s.window_len != cfg.window_len || s.frame_hop != cfg.hop {
        return Err(SignalError::ShapeMismatch(format!(
            "spectrogram ({} bins, window {}, hop {}) inconsistent with config ({} bins, window {}, hop {})",
            s.n_bins,
            s.window_len,
            s.frame_hop,
            cfg.n_bins(),
            cfg.window_len,
            cfg.hop
        )));
    }
    let lead = cfg.window_len - cfg.hop;
    let analysis = cfg.analysis_window();
    let synthesis = cfg.synthesis_window();
    let padded_len = lead + s.n_frames * cfg.hop + cfg.window_len;

    let mut planner = FftPlanner::new();
    let ifft = planner.plan_fft_inverse(cfg.fft_len);
    let mut buf = vec![Complex64::ZERO; cfg.fft_len];

    let mut acc = vec![0.0f64; padded_len];
    let mut env = vec![0.0f64; padded_len];
    let scale = 1.0 / cfg.fft_len as f64;
    for t in 0..s.n_frames {
        // Rebuild the full Hermitian spectrum from the one-sided half.
        let frame = s.frame(t);
        buf[..s.n_bins].copy_from_slice(frame);
        for f in 1..cfg.fft_len - s.n_bins + 1 {
            buf[cfg.fft_len - f] = frame[f].conj();
        }
        ifft.process(&mut buf);
        let base = t * cfg.hop;
        for n in 0..cfg.window_len {
            acc[base + n] += buf[n].re * scale * synthesis[n];
            env[base + n] += analysis[n] * synthesis[n];
        }
    }

    let mut samples = vec![0.0f64; out_len];
    for (i, sample) in samples.iter_mut().enumerate() {
        let p = i + lead;
        if p < padded_len && env[p] > 1e-12 {
            *sample = acc[p] / env[p];
        }
    }
    Ok(Waveform::new(samples, crate::SAMPLE_RATE))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::signals::WindowKind;

    fn noise(len: usize, seed: u64) -> Vec<f64> {
        let mut state = seed.max(1);
        (0..len)
            .map(|_| {
                state ^= state << 13;
                state ^= state >> 7;
                state ^= state << 17;
                (state >> 11) as f64 / (1u64 << 52) as f64 - 1.0
            })
            .collect()
    }

    fn rel_l2(a: &[f64], b: &[f64]) -> f64 {
        let num: f64 = a
            .iter()
            .zip(b.iter())
            .map(|(x, y)| (x - y) * (x - y))
            .sum();
        let den: f64 = b.iter().map(|x| x * x).sum();
        (num / den.max(1e-300)).sqrt()
    }

    #[test]
    fn impulse_frame_energy() {
        // A unit impulse at sample 0 lands in the frames whose window spans
        // it; total spectrogram energy equals the windowed-impulse energy
        // summed over those frames (Parseval per frame).
        let cfg = StftConfig::default();
        let mut samples = vec![0.0; 1600];
        samples[0] = 1.0;
        let x = Waveform::pipeline(samples);
        let spec = stft(&x, &cfg).unwrap();
        let win = cfg.analysis_window();
        let lead = cfg.window_len - cfg.hop;
        // Frame t covers padded positions [t*hop, t*hop + window); sample 0
        // sits at padded position `lead`.
        let mut expected = 0.0;
        for t in 0..spec.n_frames {
            let offset = lead as isize - (t * cfg.hop) as isize;
            if (0..cfg.window_len as isize).contains(&offset) {
                expected += win[offset as usize].powi(2);
            }
        }
        // One-sided energy: double the interior bins.
        let mut got = 0.0;
        for t in 0..spec.n_frames {
            for f in 0..spec.n_bins {
                let w = if f == 0 || f == spec.n_bins - 1 {
                    1.0
                } else {
                    2.0
                };
                got += w * spec.at(t, f).norm_sqr();
            }
        }
        got /= cfg.fft_len as f64;
        assert!(
            (got - expected).abs() < 1e-9,
            "got {got}, expected {expected}"
        );
    }

    #[test]
    fn sine_peaks_at_expected_bin() {
        let cfg = StftConfig::default();
        let f_hz = 1000.0;
        let samples: Vec<f64> = (0..8000)
            .map(|n| (2.0 * std::f64::consts::PI * f_hz * n as f64 / 16000.0).sin())
            .collect();
        let spec = stft(&Waveform::pipeline(samples), &cfg).unwrap();
        let expected_bin = (f_hz * cfg.fft_len as f64 / 16000.0).round() as usize;
        assert_eq!(expected_bin, 32);
        // Check an interior frame (edges see partial windows).
        let t = spec.n_frames / 2;
        let peak = (0..spec.n_bins)
            .max_by(|&a, &b| {
                spec.at(t, a)
                    .norm()
                    .partial_cmp(&spec.at(t, b).norm())
                    .unwrap()
            })
            .unwrap();
        assert_eq!(peak, expected_bin);
    }

    #[test]
    fn round_trip_random_noise() {
        let cfg = StftConfig::default();
        let samples = noise(16_000, 7);
        let x = Waveform::pipeline(samples.clone());
        let spec = stft(&x, &cfg).unwrap();
        let y = istft(&spec, &cfg, x.len()).unwrap();
        assert!(rel_l2(&y.samples, &samples) < 1e-6);
    }

    #[test]
    fn round_trip_hann_rect_pair() {
        let cfg = StftConfig {
            window: WindowKind::Hann,
            ..StftConfig::default()
        };
        let samples = noise(5000, 21);
        let x = Waveform::pipeline(samples.clone());
        let spec = stft(&x, &cfg).unwrap();
        let y = istft(&spec, &cfg, x.len()).unwrap();
        assert!(rel_l2(&y.samples, &samples) < 1e-6);
    }

    #[test]
    fn round_trip_awkward_length() {
        let cfg = StftConfig::default();
        for len in [1, 100, 127, 128, 129, 512, 700] {
            let samples = noise(len, len as u64);
            let x = Waveform::pipeline(samples.clone());
            let spec = stft(&x, &cfg).unwrap();
            assert_eq!(spec.n_frames, len.div_ceil(cfg.hop).max(1));
            let y = istft(&spec, &cfg, len).unwrap();
            assert!(
                rel_l2(&y.samples, &samples) < 1e-6,
                "len {len}: rel {}",
                rel_l2(&y.samples, &samples)
            );
        }
    }

    #[test]
    fn zero_spectrogram_gives_zero_waveform() {
        let cfg = StftConfig::default();
        let spec = ComplexSpectrogram::zeros(10, cfg.n_bins(), &cfg);
        let y = istft(&spec, &cfg, 1280).unwrap();
        assert!(y.samples.iter().all(|&s| s == 0.0));
    }

    #[test]
    fn single_frame_is_time_local() {
        let cfg = StftConfig::default();
        let mut spec = ComplexSpectrogram::zeros(20, cfg.n_bins(), &cfg);
        let t = 10;
        // Spectrum of an impulse at the window center, so the frame's
        // content survives the synthesis window.
        for f in 0..spec.n_bins {
            let phase = -2.0 * std::f64::consts::PI * (f * cfg.window_len / 2) as f64
                / cfg.fft_len as f64;
            *spec.at_mut(t, f) = Complex64::new(phase.cos(), phase.sin());
        }
        let y = istft(&spec, &cfg, 20 * cfg.hop).unwrap();
        // Frame t covers padded samples [t*hop, t*hop + window), i.e. output
        // samples [t*hop - lead, t*hop - lead + window).
        let lead = cfg.window_len - cfg.hop;
        let lo = t * cfg.hop - lead;
        let hi = lo + cfg.window_len;
        for (i, &s) in y.samples.iter().enumerate() {
            if i < lo || i >= hi {
                assert!(s.abs() < 1e-12, "sample {i} = {s} outside [{lo},{hi})");
            }
        }
        assert!(y.samples[lo..hi].iter().any(|&s| s.abs() > 1e-6));
    }

    #[test]
    fn stft_rejects_empty_input() {
        let cfg = StftConfig::default();
        assert!(matches!(
            stft(&Waveform::pipeline(vec![]), &cfg),
            Err(SignalError::EmptyInput)
        ));
    }

    #[test]
    fn stft_linearity() {
        let cfg = StftConfig::default();
        let xa = noise(3000, 3);
        let xb = noise(3000, 4);
        let (a, b) = (0.7, -1.3);
        let mixed: Vec<f64> = xa
            .iter()
            .zip(xb.iter())
            .map(|(x, y)| a * x + b * y)
            .collect();
        let sa = stft(&Waveform::pipeline(xa), &cfg).unwrap();
        let sb = stft(&Waveform::pipeline(xb), &cfg).unwrap();
        let sm = stft(&Waveform::pipeline(mixed), &cfg).unwrap();
        for i in 0..sm.bins.len() {
            let lin = a * sa.bins[i] + b * sb.bins[i];
            assert!((sm.bins[i] - lin).norm() < 1e-10);
        }
    }
}
