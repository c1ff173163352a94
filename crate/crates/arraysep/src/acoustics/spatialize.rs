//! Renders dry utterances into multichannel mixtures.

use num_complex::Complex64;
use rustfft::FftPlanner;

use super::{direct_path_rir, simulate_rir, AcousticsError, MixtureExample, Scenario};
use crate::signals::{MultichannelWaveform, Waveform};
use crate::SAMPLE_RATE;

/// Convolves each dry utterance with its full image-method RIR per
/// microphone and sums speakers into a mixture. Targets are the dry
/// signals through the direct-path (order-0) response at the reference
/// mic only, so reverberant tails are excluded from them. All channels
/// and targets are trimmed to the longest dry length.
pub fn spatialize(dry: &[Waveform], scenario: &Scenario) -> Result<MixtureExample, AcousticsError> {
    if dry.len() != scenario.n_speakers() {
        return Err(AcousticsError::LengthMismatch(format!(
            "{} dry signals for {} speakers",
            dry.len(),
            scenario.n_speakers()
        )));
    }
    for d in dry {
        if d.sample_rate != SAMPLE_RATE {
            return Err(AcousticsError::Signal(
                crate::signals::SignalError::SampleRate {
                    found: d.sample_rate,
                },
            ));
        }
        if d.is_empty() {
            return Err(AcousticsError::LengthMismatch("empty dry signal".into()));
        }
    }

    let out_len = dry.iter().map(Waveform::len).max().unwrap();
    let mics = scenario.mic_positions();
    let mut mixture = vec![vec![0.0f64; out_len]; mics.len()];
    let mut targets = Vec::with_capacity(dry.len());

    for (n, d) in dry.iter().enumerate() {
        let src = scenario.source_position(n);
        for (m, mic) in mics.iter().enumerate() {
            let rir = simulate_rir(&scenario.room, src, *mic)?;
            let wet = fft_convolve(&d.samples, &rir.taps);
            for (acc, w) in mixture[m].iter_mut().zip(wet.iter()) {
                *acc += w;
            }
        }
        let direct = direct_path_rir(src, mics[0])?;
        let mut t = fft_convolve(&d.samples, &direct.taps);
        t.resize(out_len, 0.0);
        targets.push(Waveform::pipeline(t));
    }

    let mixture = MultichannelWaveform::new(
        mixture.into_iter().map(Waveform::pipeline).collect(),
    )?;
    Ok(MixtureExample {
        mixture,
        targets,
        scenario: scenario.clone(),
        utterance_ids: Vec::new(),
    })
}

/// Full linear convolution via FFT, truncated to `a.len() + b.len() - 1`.
pub(crate) fn fft_convolve(a: &[f64], b: &[f64]) -> Vec<f64> {
    if a.is_empty() || b.is_empty() {
        return Vec::new();
    }
    let out_len = a.len() + b.len() - 1;
    let fft_len = out_len.next_power_of_two();
    let mut planner = FftPlanner::new();
    let fft = planner.plan_fft_forward(fft_len);
    let ifft = planner.plan_fft_inverse(fft_len);

    let mut fa: Vec<Complex64> = a.iter().map(|&x| Complex64::new(x, 0.0)).collect();
    fa.resize(fft_len, Complex64::ZERO);
    let mut fb: Vec<Complex64> = b.iter().map(|&x| Complex64::new(x, 0.0)).collect();
    fb.resize(fft_len, Complex64::ZERO);
    fft.process(&mut fa);
    fft.process(&mut fb);
    for (x, y) in fa.iter_mut().zip(fb.iter()) {
        *x *= y;
    }
    ifft.process(&mut fa);
    let scale = 1.0 / fft_len as f64;
    fa[..out_len].iter().map(|c| c.re * scale).collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::acoustics::{
        sample_scenario, ArrayGeometry, Room, SamplerConfig, Scenario, SourcePlacement, Vec3,
    };
    use crate::SPEED_OF_SOUND;

    fn noise(len: usize, seed: u64) -> Waveform {
        let mut state = seed.max(1);
        Waveform::pipeline(
            (0..len)
                .map(|_| {
                    state ^= state << 13;
                    state ^= state >> 7;
                    state ^= state << 17;
                    ((state >> 11) as f64 / (1u64 << 52) as f64 - 1.0) * 0.3
                })
                .collect(),
        )
    }

    fn manual_scenario(t60: f64, sources: Vec<SourcePlacement>) -> Scenario {
        let room = Room::new(Vec3::new(5.0, 5.0, 3.5), t60);
        Scenario {
            array_center: room.center(),
            room,
            array: ArrayGeometry::default(),
            sources,
            azimuth_resolution_deg: 5.0,
            seed: 0,
        }
    }

    #[test]
    fn convolve_matches_direct_form() {
        let a = [1.0, 2.0, -1.0, 0.5];
        let b = [0.5, 0.0, 0.25];
        let got = fft_convolve(&a, &b);
        let mut want = vec![0.0; a.len() + b.len() - 1];
        for (i, x) in a.iter().enumerate() {
            for (j, y) in b.iter().enumerate() {
                want[i + j] += x * y;
            }
        }
        for (g, w) in got.iter().zip(want.iter()) {
            assert!((g - w).abs() < 1e-12);
        }
    }

    #[test]
    fn single_anechoic_source_equals_target_at_reference() {
        // One speaker, t60 = 0: the reference-mic mixture is exactly the
        // direct-path target.
        let d = 1.0;
        let s = manual_scenario(
            0.0,
            vec![SourcePlacement {
                azimuth_deg: 30.0,
                distance_m: d,
            }],
        );
        let dry = noise(4000, 5);
        let ex = spatialize(&[dry], &s).unwrap();
        assert_eq!(ex.mixture.n_channels(), 7);
        for (m, t) in ex.mixture.reference().samples.iter().zip(&ex.targets[0].samples) {
            assert!((m - t).abs() < 1e-12);
        }
    }

    #[test]
    fn anechoic_mixture_is_sum_of_contributions() {
        let s = manual_scenario(
            0.0,
            vec![
                SourcePlacement {
                    azimuth_deg: 40.0,
                    distance_m: 0.8,
                },
                SourcePlacement {
                    azimuth_deg: -120.0,
                    distance_m: 1.4,
                },
            ],
        );
        let d0 = noise(3000, 11);
        let d1 = noise(3000, 13);
        let both = spatialize(&[d0.clone(), d1.clone()], &s).unwrap();
        let zeros = Waveform::pipeline(vec![0.0; 3000]);
        // Spatializing with one dry signal silenced isolates the other's
        // contribution; linearity means they add back to the mixture.
        let only0 = spatialize(&[d0.clone(), zeros.clone()], &s).unwrap();
        let only1 = spatialize(&[zeros, d1], &s).unwrap();
        for ch in 0..7 {
            for i in 0..3000 {
                let sum = only0.mixture.channels[ch].samples[i]
                    + only1.mixture.channels[ch].samples[i];
                let got = both.mixture.channels[ch].samples[i];
                assert!((sum - got).abs() < 1e-10);
            }
        }
        // Each anechoic target is that speaker's reference-channel image.
        for i in 0..3000 {
            assert!((both.targets[0].samples[i] - only0.mixture.reference().samples[i]).abs() < 1e-12);
        }
    }

    #[test]
    fn reverberant_mixture_exceeds_target_sum() {
        // The reverberant tail lives in the mixture but not in the
        // direct-path targets.
        let cfg = SamplerConfig::new(2, 5.0, true);
        let s = sample_scenario(3, &cfg).unwrap();
        let ex = spatialize(&[noise(3000, 17), noise(3000, 19)], &s).unwrap();
        let mut residual = 0.0;
        for i in 0..3000 {
            let sum: f64 = ex.targets.iter().map(|t| t.samples[i]).sum();
            residual += (ex.mixture.reference().samples[i] - sum).powi(2);
        }
        assert!(residual > 0.0);
    }

    #[test]
    fn direct_path_delay_visible_at_reference() {
        let d = 1.0;
        let s = manual_scenario(
            0.0,
            vec![SourcePlacement {
                azimuth_deg: 0.0,
                distance_m: d,
            }],
        );
        let mut impulse = vec![0.0; 2000];
        impulse[0] = 1.0;
        let ex = spatialize(&[Waveform::pipeline(impulse)], &s).unwrap();
        let expected = (d / SPEED_OF_SOUND * SAMPLE_RATE as f64).round() as usize;
        let peak = ex
            .targets[0]
            .samples
            .iter()
            .enumerate()
            .max_by(|(_, a), (_, b)| a.abs().partial_cmp(&b.abs()).unwrap())
            .unwrap()
            .0;
        assert!(peak.abs_diff(expected) <= 1);
    }

    #[test]
    fn rejects_count_and_rate_mismatch() {
        let s = manual_scenario(
            0.0,
            vec![SourcePlacement {
                azimuth_deg: 0.0,
                distance_m: 1.0,
            }],
        );
        assert!(spatialize(&[], &s).is_err());
        let mut wrong = noise(100, 1);
        wrong.sample_rate = 8000;
        assert!(spatialize(&[wrong], &s).is_err());
    }
}
