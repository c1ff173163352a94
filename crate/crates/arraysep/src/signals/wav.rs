//! Minimal RIFF/WAVE reader and writer.
//!
//! Supports PCM16 and IEEE float32, 1-7 channels, 16 kHz only. Other rates
//! are rejected rather than resampled. The parser is defensive: it must
//! return an error, never panic, on arbitrary input bytes (it is fuzzed).

use std::io::Write;
use std::path::Path;

use super::{MultichannelWaveform, SignalError, Waveform};
use crate::SAMPLE_RATE;

const MAX_CHANNELS: usize = 7;

/// Sample encodings supported on disk. The pipeline keeps f64 internally.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum WavEncoding {
    Pcm16,
    Float32,
}

/// Parses a WAV file from bytes.
pub fn parse_wav(bytes: &[u8]) -> Result<MultichannelWaveform, SignalError> {
    if bytes.len() < 12 || &bytes[0..4] != b"RIFF" || &bytes[8..12] != b"WAVE" {
        return Err(SignalError::WavFormat("not a RIFF/WAVE file".into()));
    }

    let mut fmt: Option<FmtChunk> = None;
    let mut data: Option<&[u8]> = None;
    let mut pos = 12usize;
    while pos + 8 <= bytes.len() {
        let id = &bytes[pos..pos + 4];
        let size = u32::from_le_bytes([
            bytes[pos + 4],
            bytes[pos + 5],
            bytes[pos + 6],
            bytes[pos + 7],
        ]) as usize;
        let body_start = pos + 8;
        let body_end = body_start
            .checked_add(size)
            .ok_or_else(|| SignalError::WavFormat("chunk size overflow".into()))?;
        if body_end > bytes.len() {
            return Err(SignalError::WavFormat("truncated chunk".into()));
        }
        let body = &bytes[body_start..body_end];
        match id {
            b"fmt " => fmt = Some(FmtChunk::parse(body)?),
            b"data" => data = Some(body),
            _ => {}
        }
        // Chunks are word-aligned; odd sizes carry a pad byte.
        pos = body_end + (size & 1);
    }

    let fmt = fmt.ok_or_else(|| SignalError::WavFormat("missing fmt chunk".into()))?;
    let data = data.ok_or_else(|| SignalError::WavFormat("missing data chunk".into()))?;

    if fmt.sample_rate != SAMPLE_RATE {
        return Err(SignalError::SampleRate {
            found: fmt.sample_rate,
        });
    }
    let n_ch = fmt.channels as usize;
    if n_ch == 0 || n_ch > MAX_CHANNELS {
        return Err(SignalError::ChannelCount(n_ch));
    }

    let bytes_per_sample = match fmt.encoding {
        WavEncoding::Pcm16 => 2,
        WavEncoding::Float32 => 4,
    };
    let frame_bytes = bytes_per_sample * n_ch;
    let n_frames = data.len() / frame_bytes;

    let mut channels = vec![Vec::with_capacity(n_frames); n_ch];
    for frame in 0..n_frames {
        for (ch, samples) in channels.iter_mut().enumerate() {
            let off = frame * frame_bytes + ch * bytes_per_sample;
            let v = match fmt.encoding {
                WavEncoding::Pcm16 => {
                    i16::from_le_bytes([data[off], data[off + 1]]) as f64 / 32768.0
                }
                WavEncoding::Float32 => f32::from_le_bytes([
                    data[off],
                    data[off + 1],
                    data[off + 2],
                    data[off + 3],
                ]) as f64,
            };
            samples.push(v);
        }
    }

    MultichannelWaveform::new(
        channels
            .into_iter()
            .map(|s| Waveform::new(s, fmt.sample_rate))
            .collect(),
    )
}

struct FmtChunk {
    encoding: WavEncoding,
    channels: u16,
    sample_rate: u32,
}

impl FmtChunk {
    fn parse(body: &[u8]) -> Result<Self, SignalError> {
        if body.len() < 16 {
            return Err(SignalError::WavFormat("fmt chunk too short".into()));
        }
        let format_tag = u16::from_le_bytes([body[0], body[1]]);
        let channels = u16::from_le_bytes([body[2], body[3]]);
        let sample_rate = u32::from_le_bytes([body[4], body[5], body[6], body[7]]);
        let bits = u16::from_le_bytes([body[14], body[15]]);
        let encoding = match (format_tag, bits) {
            (1, 16) => WavEncoding::Pcm16,
            (3, 32) => WavEncoding::Float32,
            (tag, bits) => {
                return Err(SignalError::WavFormat(format!(
                    "format tag {tag} with {bits} bits not supported (PCM16 or float32 only)"
                )))
            }
        };
        Ok(Self {
            encoding,
            channels,
            sample_rate,
        })
    }
}

/// Reads a WAV file from disk.
pub fn read_wav(path: impl AsRef<Path>) -> Result<MultichannelWaveform, SignalError> {
    let bytes = std::fs::read(path)?;
    parse_wav(&bytes)
}

/// Writes a (multi-channel) waveform as a WAV file.
pub fn write_wav(
    path: impl AsRef<Path>,
    x: &MultichannelWaveform,
    encoding: WavEncoding,
) -> Result<(), SignalError> {
    let n_ch = x.n_channels();
    if n_ch == 0 || n_ch > MAX_CHANNELS {
        return Err(SignalError::ChannelCount(n_ch));
    }
    let bytes = encode_wav(x, encoding)?;
    let mut file = std::fs::File::create(path)?;
    file.write_all(&bytes)?;
    Ok(())
}

/// Encodes a waveform into WAV bytes.
pub fn encode_wav(x: &MultichannelWaveform, encoding: WavEncoding) -> Result<Vec<u8>, SignalError> {
    let n_ch = x.n_channels() as u16;
    let n_frames = x.len() as u32;
    let (format_tag, bits): (u16, u16) = match encoding {
        WavEncoding::Pcm16 => (1, 16),
        WavEncoding::Float32 => (3, 32),
    };
    let block_align = n_ch * bits / 8;
    let data_len = n_frames * block_align as u32;
    let sample_rate = x.sample_rate();

    let mut out = Vec::with_capacity(44 + data_len as usize);
    out.extend_from_slice(b"RIFF");
    out.extend_from_slice(&(36 + data_len).to_le_bytes());
    out.extend_from_slice(b"WAVE");
    out.extend_from_slice(b"fmt ");
    out.extend_from_slice(&16u32.to_le_bytes());
    out.extend_from_slice(&format_tag.to_le_bytes());
    out.extend_from_slice(&n_ch.to_le_bytes());
    out.extend_from_slice(&sample_rate.to_le_bytes());
    out.extend_from_slice(&(sample_rate * block_align as u32).to_le_bytes());
    out.extend_from_slice(&block_align.to_le_bytes());
    out.extend_from_slice(&bits.to_le_bytes());
    out.extend_from_slice(b"data");
    out.extend_from_slice(&data_len.to_le_bytes());
    for frame in 0..n_frames as usize {
        for ch in &x.channels {
            let v = ch.samples[frame];
            match encoding {
                WavEncoding::Pcm16 => {
                    let q = (v * 32768.0).round().clamp(-32768.0, 32767.0) as i16;
                    out.extend_from_slice(&q.to_le_bytes());
                }
                WavEncoding::Float32 => out.extend_from_slice(&(v as f32).to_le_bytes()),
            }
        }
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn ramp(n: usize, scale: f64) -> Waveform {
        Waveform::pipeline((0..n).map(|i| (i as f64 / n as f64 - 0.5) * scale).collect())
    }

    #[test]
    fn float32_round_trip_is_bit_exact() {
        let dir = std::env::temp_dir().join("arraysep_wav_f32");
        std::fs::create_dir_all(&dir).unwrap();
        let path = dir.join("rt.wav");
        let x = MultichannelWaveform::new(vec![ramp(100, 1.0)]).unwrap();
        write_wav(&path, &x, WavEncoding::Float32).unwrap();
        let y = read_wav(&path).unwrap();
        for (a, b) in x.channels[0].samples.iter().zip(&y.channels[0].samples) {
            assert_eq!(*a as f32, *b as f32);
            assert_eq!(*b, *b as f32 as f64);
        }
    }

    #[test]
    fn pcm16_quantization_within_one_lsb() {
        let dir = std::env::temp_dir().join("arraysep_wav_pcm");
        std::fs::create_dir_all(&dir).unwrap();
        let path = dir.join("rt16.wav");
        let x = MultichannelWaveform::new(vec![ramp(257, 1.8)]).unwrap();
        write_wav(&path, &x, WavEncoding::Pcm16).unwrap();
        let y = read_wav(&path).unwrap();
        for (a, b) in x.channels[0].samples.iter().zip(&y.channels[0].samples) {
            let clamped = a.clamp(-1.0, 32767.0 / 32768.0);
            assert!((clamped - b).abs() <= 1.0 / 32768.0 + 1e-12);
        }
    }

    #[test]
    fn seven_channels_preserved_in_order() {
        let dir = std::env::temp_dir().join("arraysep_wav_7ch");
        std::fs::create_dir_all(&dir).unwrap();
        let path = dir.join("mc.wav");
        let chans: Vec<Waveform> = (0..7)
            .map(|c| Waveform::pipeline(vec![c as f64 * 0.1; 10]))
            .collect();
        let x = MultichannelWaveform::new(chans).unwrap();
        write_wav(&path, &x, WavEncoding::Float32).unwrap();
        let y = read_wav(&path).unwrap();
        assert_eq!(y.n_channels(), 7);
        for c in 0..7 {
            assert_eq!(y.channels[c].samples[0], (c as f64 * 0.1) as f32 as f64);
        }
    }

    #[test]
    fn rejects_wrong_sample_rate() {
        let mut x = MultichannelWaveform::new(vec![ramp(16, 0.5)]).unwrap();
        x.channels[0].sample_rate = 8000;
        let bytes = encode_wav(&x, WavEncoding::Pcm16).unwrap();
        match parse_wav(&bytes) {
            Err(SignalError::SampleRate { found }) => assert_eq!(found, 8000),
            other => panic!("expected sample-rate error, got {other:?}"),
        }
    }

    #[test]
    fn rejects_garbage() {
        assert!(parse_wav(b"").is_err());
        assert!(parse_wav(b"RIFFxxxxWAVE").is_err());
        assert!(parse_wav(&[0x52, 0x49, 0x46, 0x46, 0xff, 0xff, 0xff, 0xff]).is_err());
    }

    #[test]
    fn rejects_too_many_channels() {
        let chans: Vec<Waveform> = (0..8).map(|_| ramp(4, 1.0)).collect();
        let x = MultichannelWaveform { channels: chans };
        assert!(matches!(
            write_wav("/tmp/never.wav", &x, WavEncoding::Pcm16),
            Err(SignalError::ChannelCount(8))
        ));
    }
}
