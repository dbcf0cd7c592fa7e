//! Line-level repair model: a transformer encoder over
//! `(line, context, message)` sequences with a line-offset embedding, an
//! MLP localizer over the per-line `BOS` states, and a pointer-generator
//! decoder that either generates from the vocabulary or copies source
//! tokens.

mod checkpoint;
mod gradcheck;
mod hparams;
mod input;
mod network;
mod train;
pub mod vocab;

use thiserror::Error;

pub use checkpoint::{ModelCheckpoint, RngState, CHECKPOINT_FORMAT_VERSION};
pub use gradcheck::{gradient_check, tiny_fixture, GRADCHECK_EPSILON, GRADCHECK_TOLERANCE, GRADCHECK_VOCAB};
pub use hparams::HyperParams;
pub use input::{
    examples_from_broken, prepare_program, EncodedExample, EncoderInput, LineSequence, PreparedProgram,
    TrainingExample,
};
pub use network::{
    sinusoid, DecodeOptions, DecodeProbe, Decoded, Dropout, Encoded, LossVars, Model, UNREACHABLE_FLOOR,
};
pub use train::{
    batch_gradients, encode_examples, read_loss_csv, write_loss_csv, BatchResult, LossRecord, Trainer,
    LOSS_FORMAT_VERSION,
};
pub use vocab::Vocabulary;

#[derive(Debug, Error)]
pub enum ModelError {
    #[error("empty training corpus")]
    EmptyCorpus,
    #[error("line {line}: sequence of {len} tokens exceeds limit {max}")]
    SequenceTooLong { line: usize, len: usize, max: usize },
    #[error("target of {len} tokens exceeds limit {max}")]
    TargetTooLong { len: usize, max: usize },
    #[error("non-finite loss at step {step}")]
    NonFiniteLoss { step: u64 },
    #[error("gradient mismatch in {tensor}: max relative error {max_rel_err:e}")]
    GradientMismatch { tensor: String, max_rel_err: f64 },
    #[error("invalid configuration: {0}")]
    InvalidConfig(String),
    #[error("no diagnostic for {0}")]
    NoDiagnostic(String),
    #[error("checkpoint: {0}")]
    Checkpoint(String),
    #[error("unsupported format version {0}")]
    UnsupportedVersion(u32),
    #[error(transparent)]
    Tensor(#[from] crepair_tensor::TensorError),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}
