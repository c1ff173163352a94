//! Trainable separator: a minimal reverse-mode autodiff engine and a
//! scaled-down dense-UNet that maps stacked multichannel real/imaginary
//! spectrogram inputs to per-speaker complex mask estimates, trainable
//! under any assignment criterion.

mod checkpoint;
mod optim;
mod separator;
mod tape;
mod train;

pub use checkpoint::{decode_checkpoint, encode_checkpoint, load_checkpoint, save_checkpoint};
pub use optim::{Adam, AdamConfig};
pub use separator::{InputFeatures, Separator, SeparatorConfig};
pub use tape::{Tape, Tensor, VarId};
pub use train::{
    example_loss, separate_spectrograms, separate_waveforms, train_step, TrainState,
};

use thiserror::Error;

#[derive(Error, Debug)]
pub enum ModelError {
    #[error("shape mismatch: {0}")]
    ShapeMismatch(String),
    #[error("speaker count mismatch: model expects {expected}, batch has {got}")]
    SpeakerCount { expected: usize, got: usize },
    #[error("checkpoint format: {0}")]
    CheckpointFormat(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}
