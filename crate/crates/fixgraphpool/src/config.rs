use serde::{Deserialize, Serialize};

use crate::FgpError;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ModelConfig {
    pub hidden_dim: usize,
    /// Number of message-passing / pooling pairs.
    pub num_layers: usize,
    /// Constant added to every normalized edge score.
    pub score_constant: f64,
    pub mlp_hidden: usize,
    pub classes: usize,
    pub epochs: usize,
    pub batch_size: usize,
    pub base_lr: f64,
    pub weight_decay: f64,
}

impl Default for ModelConfig {
    fn default() -> Self {
        Self {
            hidden_dim: 32,
            num_layers: 3,
            score_constant: 0.5,
            mlp_hidden: 32,
            classes: 2,
            epochs: 40,
            batch_size: 32,
            base_lr: 0.005,
            weight_decay: 0.001,
        }
    }
}

impl ModelConfig {
    pub fn validate(&self) -> Result<(), FgpError> {
        let bad = |m: &str| Err(FgpError::InvalidConfig(m.to_string()));
        if self.hidden_dim == 0 || self.mlp_hidden == 0 {
            return bad("hidden dimensions must be positive");
        }
        if self.num_layers == 0 {
            return bad("num_layers must be at least 1");
        }
        if !(self.score_constant >= 0.0) {
            return bad("score_constant must be non-negative");
        }
        if self.classes != 2 {
            return bad("only binary classification is supported");
        }
        if self.epochs == 0 || self.batch_size == 0 {
            return bad("epochs and batch_size must be positive");
        }
        if !(self.base_lr > 0.0) || !(self.weight_decay >= 0.0) {
            return bad("learning rate must be positive and weight decay non-negative");
        }
        Ok(())
    }
}
