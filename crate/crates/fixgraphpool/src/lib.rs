//! Graph classifier over fixation graphs: GCN message passing alternating
//! with edge-contraction pooling, per-layer mean readouts fused into a
//! two-layer MLP.

pub mod config;
pub mod model;
pub mod pool;
pub mod sample;
pub mod scaler;
pub mod train;

pub use config::ModelConfig;
pub use model::{FixGraphPool, LayerTrace, PreparedGraph};
pub use pool::{contract_edges, edge_scores, plan_contraction, ContractionPlan, PooledEdge, PooledGraph};
pub use scaler::GraphScaler;
pub use train::{predict_all, score, train, TrainOutcome};

use sagaze_nn::NnError;

#[derive(Debug, thiserror::Error)]
pub enum FgpError {
    #[error("graph has no nodes")]
    EmptyGraph,
    #[error("no graphs to train or evaluate on")]
    EmptyFold,
    #[error("invalid model config: {0}")]
    InvalidConfig(String),
    #[error("model checkpoint: {0}")]
    Checkpoint(String),
    #[error(transparent)]
    Nn(#[from] NnError),
}
