//! A small 64-bit tensor engine: reverse-mode autodiff on a tape, a weighted
//! GCN layer, grouped softmax, parameter storage and the AdamW optimizer.

pub mod gradcheck;
pub mod layers;
pub mod optim;
pub mod params;
pub mod tape;
pub mod tensor;

pub use layers::{gcn_layer, grouped_softmax, Activation, GcnEdge, Linear};
pub use optim::{lr_at, AdamW, OptimState};
pub use params::{ParamId, ParamStore};
pub use tape::{Gradients, Tape, Var};
pub use tensor::Tensor;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum NnError {
    #[error("shape mismatch: {0}")]
    ShapeMismatch(String),
    #[error("edge weight must be positive, got {0}")]
    NonPositiveWeight(f64),
    #[error("group {0} is empty")]
    EmptyGroup(usize),
    #[error("index {0} is not assigned to exactly one group")]
    InvalidPartition(usize),
    #[error("tape node {0} consumes a value recorded after it")]
    GraphCycle(usize),
    #[error("unknown parameter `{0}`")]
    UnknownParam(String),
    #[error("checkpoint: {0}")]
    Checkpoint(String),
}
