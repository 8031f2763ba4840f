//! Run configuration: one TOML document with a section per stage.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use sagaze_core::events::ClassifierConfig;
use sagaze_core::graph::GraphConfig;
use sagaze_core::synth::SynthConfig;
use sagaze_fixgraphpool::ModelConfig;
use sagaze_harness::{ExperimentConfig, HarnessConfig};

use crate::error::CliError;

pub const DEFAULT_SEED: u64 = 7;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    /// Master seed; every random stage derives its seed from it.
    pub seed: u64,
    /// Input dataset directory.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub data_dir: Option<PathBuf>,
    /// Output directory.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub out_dir: Option<PathBuf>,
    pub classifier: ClassifierConfig,
    pub graph: GraphConfig,
    pub model: ModelConfig,
    pub harness: HarnessConfig,
    pub synth: SynthConfig,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            seed: DEFAULT_SEED,
            data_dir: None,
            out_dir: None,
            classifier: ClassifierConfig::default(),
            graph: GraphConfig::default(),
            model: ModelConfig::default(),
            harness: HarnessConfig::default(),
            synth: SynthConfig::default(),
        }
    }
}

impl RunConfig {
    pub fn from_toml(text: &str) -> Result<Self, CliError> {
        let cfg: Self = toml::from_str(text).map_err(|e| CliError::Config(e.message().to_string()))?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path).map_err(|e| CliError::Config(format!("{}: {e}", path.display())))?;
        Self::from_toml(&text).map_err(|e| match e {
            CliError::Config(msg) => CliError::Config(format!("{}: {msg}", path.display())),
            other => other,
        })
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("config serializes to TOML")
    }

    pub fn validate(&self) -> Result<(), CliError> {
        let cfg = |e: &dyn std::fmt::Display| CliError::Config(e.to_string());
        self.classifier.validate().map_err(|e| cfg(&e))?;
        self.graph.validate().map_err(|e| cfg(&e))?;
        self.model.validate().map_err(|e| cfg(&e))?;
        self.harness.windows.validate().map_err(|e| cfg(&e))?;
        self.synth.validate().map_err(|e| cfg(&e))?;
        if self.harness.folds < 2 {
            return Err(CliError::Config(format!("harness.folds must be at least 2, got {}", self.harness.folds)));
        }
        Ok(())
    }

    /// The parameters that determine experiment results.
    pub fn experiment(&self) -> ExperimentConfig {
        ExperimentConfig {
            classifier: self.classifier.clone(),
            graph: self.graph.clone(),
            model: self.model.clone(),
            harness: self.harness.clone(),
        }
    }
}
