//! Inference: localize the faulty line, beam-decode replacements, splice
//! them in and keep whichever lowers the compiler's error count, for up to
//! a fixed number of rounds. Also the accuracy metrics.

mod beam;
mod driver;
mod metrics;

use thiserror::Error;

pub use beam::{beam_search, greedy_decode, Hypothesis, StepModel};
pub use driver::{
    beam_decode, rank_lines, repair_program, IterationRecord, LineDecoder, RepairCandidate, RepairConfig,
    RepairStatus, RepairTrace,
};
pub use metrics::{evaluate, score_example, EvalCase, ExampleScore, GroundTruth, Metrics, ACC_KS};

use crate::diagnostics::DiagnosticsError;
use crate::model::ModelError;
use crate::program::TokenizeError;

#[derive(Debug, Error)]
pub enum RepairError {
    #[error(transparent)]
    Compiler(#[from] DiagnosticsError),
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error(transparent)]
    Tokenize(#[from] TokenizeError),
    #[error("no model checkpoint at {0}")]
    ModelMissing(String),
    #[error("acc@k needs ground-truth lines; this set has none")]
    MissingGroundTruth,
}
