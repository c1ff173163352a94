//! Self-contained generator of speech-like test signals.
//!
//! Real speech corpora are licensed, so experiments run on synthetic
//! "utterances": noise driven through a few drifting formant resonators
//! and shaped by a syllabic amplitude envelope with occasional pauses.
//! The result is broadband, strongly modulated, and distinct across
//! seeds, which is what the separation and localization stages care
//! about. Deterministic given the seed.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::signals::Waveform;
use crate::SAMPLE_RATE;

/// Two-pole resonator with unit-gain-ish peak, used as a formant filter.
struct Resonator {
    b0: f64,
    a1: f64,
    a2: f64,
    z1: f64,
    z2: f64,
}

impl Resonator {
    fn new(center_hz: f64, bandwidth_hz: f64) -> Self {
        let fs = SAMPLE_RATE as f64;
        let r = (-std::f64::consts::PI * bandwidth_hz / fs).exp();
        let theta = 2.0 * std::f64::consts::PI * center_hz / fs;
        Self {
            b0: (1.0 - r * r) * theta.sin(),
            a1: -2.0 * r * theta.cos(),
            a2: r * r,
            z1: 0.0,
            z2: 0.0,
        }
    }

    fn retune(&mut self, center_hz: f64, bandwidth_hz: f64) {
        let fresh = Self::new(center_hz, bandwidth_hz);
        self.b0 = fresh.b0;
        self.a1 = fresh.a1;
        self.a2 = fresh.a2;
        // Keep filter state so retuning between syllables stays click-free.
    }

    #[inline]
    fn tick(&mut self, x: f64) -> f64 {
        let y = self.b0 * x - self.a1 * self.z1 - self.a2 * self.z2;
        self.z2 = self.z1;
        self.z1 = y;
        y
    }
}

/// Generates a speech-like utterance of `len` samples at 16 kHz with the
/// given RMS level.
pub fn speech_like(seed: u64, len: usize, target_rms: f64) -> Waveform {
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0x5353_594e_5448); // distinct stream per purpose
    let fs = SAMPLE_RATE as f64;

    let mut formants = [
        Resonator::new(500.0, 90.0),
        Resonator::new(1500.0, 120.0),
        Resonator::new(2800.0, 160.0),
    ];

    let mut samples = vec![0.0f64; len];
    let mut pos = 0usize;
    // Spectral tilt: leaky integration of white noise before the formants.
    let mut tilt = 0.0f64;
    while pos < len {
        // Syllables of 120-280 ms at a 3-5 Hz rhythm; roughly one in six
        // is a pause. Pauses keep a low floor rather than digital
        // silence, like breath and room tone do.
        let syllable = rng.random_range((0.12 * fs) as usize..(0.28 * fs) as usize);
        let silent = rng.random_range(0.0..1.0) < 0.17;
        let amp = if silent {
            0.08
        } else {
            rng.random_range(0.4..1.0)
        };
        formants[0].retune(rng.random_range(300.0..900.0), rng.random_range(60.0..120.0));
        formants[1].retune(rng.random_range(900.0..2500.0), rng.random_range(80.0..160.0));
        formants[2].retune(rng.random_range(2500.0..3500.0), rng.random_range(120.0..220.0));

        let end = (pos + syllable).min(len);
        let span = (end - pos).max(1) as f64;
        for i in pos..end {
            let phase = (i - pos) as f64 / span;
            // Raised-cosine syllable envelope over a small floor, so no
            // stretch of the signal is exactly zero.
            let env = amp * (0.1 + 0.9 * 0.5 * (1.0 - (2.0 * std::f64::consts::PI * phase).cos()));
            let white: f64 = rng.random_range(-1.0..1.0);
            tilt = 0.85 * tilt + 0.15 * white;
            let excitation = 0.6 * tilt + 0.4 * white;
            let voiced: f64 = formants.iter_mut().map(|f| f.tick(excitation)).sum();
            samples[i] = env * voiced;
        }
        pos = end;
    }

    let rms = (samples.iter().map(|s| s * s).sum::<f64>() / len.max(1) as f64).sqrt();
    if rms > 0.0 {
        let g = target_rms / rms;
        for s in &mut samples {
            *s *= g;
        }
    }
    Waveform::pipeline(samples)
}
