//! Minimal reverse-mode differentiation for dense `f64` matrices, with the
//! handful of fused ops a transformer needs (layer norm, segmented
//! multi-head attention, embedding lookup) plus Adam and a finite-difference
//! gradient checker.

pub mod check;
pub mod graph;
pub mod optim;
pub mod params;

pub use check::{check_gradients, relative_error, GradCheckReport, TensorCheck};
pub use graph::{sigmoid, softmax_rows, AttnSegment, AttnSpec, Graph, Var};
pub use optim::Adam;
pub use params::{Gradients, ParamId, ParamStore};

pub use ndarray::{self, Array2};

#[derive(Debug, thiserror::Error)]
pub enum TensorError {
    #[error("unknown parameter `{0}`")]
    UnknownParam(String),
}
