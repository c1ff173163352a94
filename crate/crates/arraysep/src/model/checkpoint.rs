//! Versioned binary checkpoints.
//!
//! Layout: an 8-byte magic, a u32 format version, a u32 header length,
//! a JSON header (config, STFT parameters, criterion, step, seed,
//! optimizer scalars, parameter shapes), then raw little-endian f64
//! buffers: every parameter, then the first moments, then the second
//! moments, in parameter order. The loader validates every length before
//! touching the payload and never panics on malformed bytes (it is
//! fuzzed).

use std::path::Path;

use serde::{Deserialize, Serialize};

use super::optim::{Adam, AdamConfig};
use super::separator::{InputFeatures, Separator, SeparatorConfig};
use super::tape::Tensor;
use super::train::TrainState;
use super::ModelError;
use crate::criteria::Criterion;
use crate::signals::StftConfig;

const MAGIC: &[u8; 8] = b"ASEPCKPT";
const VERSION: u32 = 1;

#[derive(Debug, Serialize, Deserialize)]
struct Header {
    config: SeparatorConfig,
    stft: StftConfig,
    criterion: Criterion,
    step: u64,
    seed: u64,
    adam: AdamConfig,
    adam_t: u64,
    param_shapes: Vec<[usize; 4]>,
}

/// Serializes a training state to checkpoint bytes.
pub fn encode_checkpoint(state: &TrainState) -> Vec<u8> {
    let header = Header {
        config: state.separator.config.clone(),
        stft: state.stft,
        criterion: state.criterion,
        step: state.step,
        seed: state.seed,
        adam: state.optimizer.config,
        adam_t: state.optimizer.t,
        param_shapes: state.separator.params.iter().map(|p| p.shape).collect(),
    };
    let header_json = serde_json::to_vec(&header).expect("header serializes");
    let payload_len: usize = state.separator.params.iter().map(Tensor::numel).sum::<usize>() * 3;
    let mut out = Vec::with_capacity(16 + header_json.len() + payload_len * 8);
    out.extend_from_slice(MAGIC);
    out.extend_from_slice(&VERSION.to_le_bytes());
    out.extend_from_slice(&(header_json.len() as u32).to_le_bytes());
    out.extend_from_slice(&header_json);
    for p in &state.separator.params {
        for v in &p.data {
            out.extend_from_slice(&v.to_le_bytes());
        }
    }
    for m in &state.optimizer.m {
        for v in m {
            out.extend_from_slice(&v.to_le_bytes());
        }
    }
    for m in &state.optimizer.v {
        for v in m {
            out.extend_from_slice(&v.to_le_bytes());
        }
    }
    out
}

/// Parses checkpoint bytes back into a training state.
pub fn decode_checkpoint(bytes: &[u8]) -> Result<TrainState, ModelError> {
    let bad = |msg: &str| ModelError::CheckpointFormat(msg.into());
    if bytes.len() < 16 {
        return Err(bad("truncated preamble"));
    }
    if &bytes[0..8] != MAGIC {
        return Err(bad("bad magic"));
    }
    let version = u32::from_le_bytes(bytes[8..12].try_into().unwrap());
    if version != VERSION {
        return Err(ModelError::CheckpointFormat(format!(
            "unsupported version {version}"
        )));
    }
    let header_len = u32::from_le_bytes(bytes[12..16].try_into().unwrap()) as usize;
    let header_end = 16usize
        .checked_add(header_len)
        .ok_or_else(|| bad("header length overflow"))?;
    if header_end > bytes.len() {
        return Err(bad("truncated header"));
    }
    let header: Header = serde_json::from_slice(&bytes[16..header_end])
        .map_err(|e| ModelError::CheckpointFormat(format!("header: {e}")))?;
    header
        .config
        .validate()
        .map_err(|e| ModelError::CheckpointFormat(format!("config: {e}")))?;

    // Declared shapes must match the config's architecture exactly; this
    // is checked shape-only, before any payload allocation.
    if header.param_shapes != header.config.param_shapes() {
        return Err(bad("parameter shapes do not match the config"));
    }
    let mut counts = Vec::with_capacity(header.param_shapes.len());
    let mut total = 0usize;
    for shape in &header.param_shapes {
        let n = shape
            .iter()
            .try_fold(1usize, |acc, &d| acc.checked_mul(d))
            .ok_or_else(|| bad("shape overflow"))?;
        total = total.checked_add(n).ok_or_else(|| bad("size overflow"))?;
        counts.push(n);
    }
    let payload_len = total
        .checked_mul(3)
        .and_then(|n| n.checked_mul(8))
        .ok_or_else(|| bad("payload overflow"))?;
    if bytes.len() != header_end + payload_len {
        return Err(ModelError::CheckpointFormat(format!(
            "payload length {} does not match declared shapes ({payload_len})",
            bytes.len() - header_end
        )));
    }

    let mut cursor = header_end;
    let mut read_block = |n: usize| {
        let mut data = Vec::with_capacity(n);
        for _ in 0..n {
            data.push(f64::from_le_bytes(
                bytes[cursor..cursor + 8].try_into().unwrap(),
            ));
            cursor += 8;
        }
        data
    };
    let params: Vec<Tensor> = header
        .param_shapes
        .iter()
        .zip(&counts)
        .map(|(&shape, &n)| Tensor::from_vec(shape, read_block(n)))
        .collect();
    let m: Vec<Vec<f64>> = counts.iter().map(|&n| read_block(n)).collect();
    let v: Vec<Vec<f64>> = counts.iter().map(|&n| read_block(n)).collect();

    if !params.iter().flat_map(|p| &p.data).all(|v| v.is_finite()) {
        return Err(bad("non-finite parameter values"));
    }

    Ok(TrainState {
        separator: Separator {
            config: header.config,
            params,
        },
        optimizer: Adam {
            config: header.adam,
            t: header.adam_t,
            m,
            v,
        },
        stft: header.stft,
        criterion: header.criterion,
        seed: header.seed,
        step: header.step,
    })
}

pub fn save_checkpoint(state: &TrainState, path: impl AsRef<Path>) -> Result<(), ModelError> {
    std::fs::write(path, encode_checkpoint(state))?;
    Ok(())
}

pub fn load_checkpoint(path: impl AsRef<Path>) -> Result<TrainState, ModelError> {
    decode_checkpoint(&std::fs::read(path)?)
}
