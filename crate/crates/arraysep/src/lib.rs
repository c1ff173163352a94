//! Desk-scale laboratory for multi-channel talker-independent speaker
//! separation.
//!
//! The crate covers the full experimental loop for comparing
//! permutation-invariant training (PIT) against location-based training
//! (LBT) on simulated microphone-array mixtures:
//!
//! - [`signals`]: STFT analysis/synthesis, complex ratio masks, WAV I/O.
//! - [`acoustics`]: image-method room impulse responses, scene sampling,
//!   spatialization of dry utterances into 7-channel mixtures.
//! - [`criteria`]: the pairwise RI+Mag loss and the PIT / azimuth /
//!   distance / combined output-speaker assignment strategies, with exact
//!   evaluation-count instrumentation.
//! - [`localization`]: mask-weighted GCC-PHAT azimuth estimation over a
//!   candidate grid.
//! - [`model`]: a small reverse-mode autodiff engine and a scaled-down
//!   dense-UNet separator trainable under any criterion.
//! - [`metrics`]: SI-SNR, SDR, ESTOI and improvement scores with
//!   fixed-order or best-permutation scoring.
//! - [`dataset`]: JSONL dataset manifests and a synthetic speech-like
//!   signal generator for self-contained experiments.
//!
//! All audio runs at 16 kHz; all internal arithmetic is `f64`.

pub mod acoustics;
pub mod criteria;
pub mod dataset;
pub mod localization;
pub mod metrics;
pub mod model;
pub mod signals;
pub mod synth;

/// Speed of sound in air, m/s.
pub const SPEED_OF_SOUND: f64 = 343.0;

/// Pipeline sample rate, Hz. All waveforms entering the pipeline must use it.
pub const SAMPLE_RATE: u32 = 16_000;
