//! Time-frequency analysis/synthesis, complex masks, and WAV file I/O.

mod stft;
mod wav;

pub use stft::{istft, stft};
pub use wav::{encode_wav, parse_wav, read_wav, write_wav, WavEncoding};

use num_complex::Complex64;
use thiserror::Error;

use crate::SAMPLE_RATE;

#[derive(Error, Debug)]
pub enum SignalError {
    #[error("empty input signal")]
    EmptyInput,
    #[error("invalid STFT config: {0}")]
    InvalidConfig(String),
    #[error("shape mismatch: {0}")]
    ShapeMismatch(String),
    #[error("unsupported WAV format: {0}")]
    WavFormat(String),
    #[error("unsupported sample rate {found} Hz (pipeline is fixed at {SAMPLE_RATE} Hz)")]
    SampleRate { found: u32 },
    #[error("channel count {0} outside supported range 1..=7")]
    ChannelCount(usize),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

/// Single-channel waveform. Samples are dimensionless amplitudes with a
/// nominal range of [-1, 1].
#[derive(Debug, Clone, PartialEq)]
pub struct Waveform {
    pub samples: Vec<f64>,
    pub sample_rate: u32,
}

impl Waveform {
    pub fn new(samples: Vec<f64>, sample_rate: u32) -> Self {
        Self {
            samples,
            sample_rate,
        }
    }

    /// Waveform at the pipeline rate of 16 kHz.
    pub fn pipeline(samples: Vec<f64>) -> Self {
        Self::new(samples, SAMPLE_RATE)
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    pub fn energy(&self) -> f64 {
        self.samples.iter().map(|s| s * s).sum()
    }

    pub fn rms(&self) -> f64 {
        if self.samples.is_empty() {
            0.0
        } else {
            (self.energy() / self.samples.len() as f64).sqrt()
        }
    }
}

/// Ordered set of synchronized channels. Channel 0 is the reference
/// microphone (the array center in the simulated setups).
#[derive(Debug, Clone, PartialEq)]
pub struct MultichannelWaveform {
    pub channels: Vec<Waveform>,
}

impl MultichannelWaveform {
    /// Builds from channels, checking that lengths and rates agree.
    pub fn new(channels: Vec<Waveform>) -> Result<Self, SignalError> {
        if channels.is_empty() {
            return Err(SignalError::EmptyInput);
        }
        let len = channels[0].len();
        let rate = channels[0].sample_rate;
        for ch in &channels {
            if ch.len() != len {
                return Err(SignalError::ShapeMismatch(format!(
                    "channel length {} != {}",
                    ch.len(),
                    len
                )));
            }
            if ch.sample_rate != rate {
                return Err(SignalError::ShapeMismatch(format!(
                    "channel sample rate {} != {}",
                    ch.sample_rate, rate
                )));
            }
        }
        Ok(Self { channels })
    }

    pub fn n_channels(&self) -> usize {
        self.channels.len()
    }

    pub fn len(&self) -> usize {
        self.channels.first().map_or(0, Waveform::len)
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn sample_rate(&self) -> u32 {
        self.channels.first().map_or(0, |c| c.sample_rate)
    }

    /// The reference channel (index 0).
    pub fn reference(&self) -> &Waveform {
        &self.channels[0]
    }
}

/// One-sided complex spectrogram, `frames x bins` row-major, together with
/// the analysis parameters that produced it.
#[derive(Debug, Clone, PartialEq)]
pub struct ComplexSpectrogram {
    pub bins: Vec<Complex64>,
    pub n_frames: usize,
    pub n_bins: usize,
    pub frame_hop: usize,
    pub window_len: usize,
    pub fft_len: usize,
}

impl ComplexSpectrogram {
    pub fn zeros(n_frames: usize, n_bins: usize, cfg: &StftConfig) -> Self {
        Self {
            bins: vec![Complex64::ZERO; n_frames * n_bins],
            n_frames,
            n_bins,
            frame_hop: cfg.hop,
            window_len: cfg.window_len,
            fft_len: cfg.fft_len,
        }
    }

    #[inline]
    pub fn at(&self, t: usize, f: usize) -> Complex64 {
        self.bins[t * self.n_bins + f]
    }

    #[inline]
    pub fn at_mut(&mut self, t: usize, f: usize) -> &mut Complex64 {
        &mut self.bins[t * self.n_bins + f]
    }

    pub fn same_shape(&self, other: &Self) -> bool {
        self.n_frames == other.n_frames && self.n_bins == other.n_bins
    }

    /// Frame `t` as a bin slice.
    pub fn frame(&self, t: usize) -> &[Complex64] {
        &self.bins[t * self.n_bins..(t + 1) * self.n_bins]
    }

    pub fn energy(&self) -> f64 {
        self.bins.iter().map(|c| c.norm_sqr()).sum()
    }
}

/// Complex time-frequency mask with the same shape as the spectrogram it
/// multiplies.
#[derive(Debug, Clone, PartialEq)]
pub struct ComplexMask {
    pub values: Vec<Complex64>,
    pub n_frames: usize,
    pub n_bins: usize,
}

impl ComplexMask {
    #[inline]
    pub fn at(&self, t: usize, f: usize) -> Complex64 {
        self.values[t * self.n_bins + f]
    }
}

/// Analysis/synthesis window family. Both families satisfy COLA with the
/// pipeline hop so `istft(stft(x))` reconstructs `x`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
pub enum WindowKind {
    /// Square-root periodic Hann on both sides (the pipeline default).
    SqrtHann,
    /// Periodic Hann analysis, rectangular synthesis.
    Hann,
}

/// STFT parameters. The pipeline default is a 32 ms window, 8 ms hop and a
/// square-root Hann analysis/synthesis pair, giving 257 one-sided bins.
#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct StftConfig {
    pub window_len: usize,
    pub hop: usize,
    pub fft_len: usize,
    pub window: WindowKind,
}

impl Default for StftConfig {
    fn default() -> Self {
        Self {
            window_len: 512,
            hop: 128,
            fft_len: 512,
            window: WindowKind::SqrtHann,
        }
    }
}

impl StftConfig {
    pub fn validate(&self) -> Result<(), SignalError> {
        if self.window_len == 0 || self.hop == 0 || self.fft_len == 0 {
            return Err(SignalError::InvalidConfig("zero-sized parameter".into()));
        }
        if self.hop > self.window_len {
            return Err(SignalError::InvalidConfig(format!(
                "hop {} exceeds window length {}",
                self.hop, self.window_len
            )));
        }
        if self.window_len % self.hop != 0 {
            return Err(SignalError::InvalidConfig(format!(
                "hop {} does not divide window length {}",
                self.hop, self.window_len
            )));
        }
        if self.fft_len < self.window_len {
            return Err(SignalError::InvalidConfig(format!(
                "fft length {} shorter than window {}",
                self.fft_len, self.window_len
            )));
        }
        Ok(())
    }

    pub fn n_bins(&self) -> usize {
        self.fft_len / 2 + 1
    }

    /// Number of analysis frames for a signal of `len` samples.
    pub fn n_frames(&self, len: usize) -> usize {
        len.div_ceil(self.hop).max(1)
    }

    /// Center frequency of bin `f` in Hz at the given sample rate.
    pub fn bin_hz(&self, f: usize, sample_rate: u32) -> f64 {
        f as f64 * sample_rate as f64 / self.fft_len as f64
    }

    pub(crate) fn analysis_window(&self) -> Vec<f64> {
        let hann = periodic_hann(self.window_len);
        match self.window {
            WindowKind::SqrtHann => hann.iter().map(|w| w.sqrt()).collect(),
            WindowKind::Hann => hann,
        }
    }

    pub(crate) fn synthesis_window(&self) -> Vec<f64> {
        match self.window {
            WindowKind::SqrtHann => self.analysis_window(),
            WindowKind::Hann => vec![1.0; self.window_len],
        }
    }
}

fn periodic_hann(len: usize) -> Vec<f64> {
    (0..len)
        .map(|n| 0.5 * (1.0 - (2.0 * std::f64::consts::PI * n as f64 / len as f64).cos()))
        .collect()
}

/// Denominator floor used when inverting near-silent mixture bins. Kept
/// far below audio energy scales so the inversion stays exact (relative
/// error `eps / |Y|^2`) on every bin the magnitude clamp does not already
/// bound.
pub const CIRM_EPS: f64 = 1e-18;
/// Magnitude ceiling applied to ideal masks; bounds loss gradients on bins
/// where the mixture is almost zero.
pub const CIRM_CLAMP: f64 = 10.0;

/// Elementwise complex product `S_hat(t,f) = M(t,f) * Y_ref(t,f)`.
pub fn apply_cirm(
    mask: &ComplexMask,
    y_ref: &ComplexSpectrogram,
) -> Result<ComplexSpectrogram, SignalError> {
    if mask.n_frames != y_ref.n_frames || mask.n_bins != y_ref.n_bins {
        return Err(SignalError::ShapeMismatch(format!(
            "mask {}x{} vs spectrogram {}x{}",
            mask.n_frames, mask.n_bins, y_ref.n_frames, y_ref.n_bins
        )));
    }
    let mut out = y_ref.clone();
    for (o, m) in out.bins.iter_mut().zip(mask.values.iter()) {
        *o *= m;
    }
    Ok(out)
}

/// Complex ideal ratio mask `M = S * conj(Y) / (|Y|^2 + eps)`, magnitude
/// clamped to [`CIRM_CLAMP`]. Applying it to `Y` recovers `S` on bins where
/// `|Y|` is well above `eps` and `|S/Y|` is below the clamp.
pub fn ideal_cirm(
    s: &ComplexSpectrogram,
    y_ref: &ComplexSpectrogram,
) -> Result<ComplexMask, SignalError> {
    if !s.same_shape(y_ref) {
        return Err(SignalError::ShapeMismatch(format!(
            "target {}x{} vs mixture {}x{}",
            s.n_frames, s.n_bins, y_ref.n_frames, y_ref.n_bins
        )));
    }
    let values = s
        .bins
        .iter()
        .zip(y_ref.bins.iter())
        .map(|(s, y)| {
            let mut m = s * y.conj() / (y.norm_sqr() + CIRM_EPS);
            let mag = m.norm();
            if mag > CIRM_CLAMP {
                m *= CIRM_CLAMP / mag;
            }
            m
        })
        .collect();
    Ok(ComplexMask {
        values,
        n_frames: s.n_frames,
        n_bins: s.n_bins,
    })
}
