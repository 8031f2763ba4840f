//! Experiment pipeline: window slicing, participant-level folds,
//! oversampling, the logistic-regression baseline and fold reports.

pub mod experiment;
pub mod folds;
pub mod logreg;
pub mod oversample;
pub mod report;
pub mod windows;

pub use experiment::{run_experiment, ExperimentConfig, ExperimentOutput, HarnessConfig};
pub use folds::make_folds;
pub use logreg::{predict_logreg, train_logreg, LogRegConfig, LogisticModel, Standardizer};
pub use oversample::oversample;
pub use report::{FoldReport, FoldSummary};
pub use windows::{process_trial, slice_windows, ProcessedTrial, WindowConfig, WindowSample};

use sagaze_core::dataset::DatasetError;
use sagaze_core::events::EventError;
use sagaze_core::graph::GraphError;
use sagaze_core::trial::TrialError;
use sagaze_fixgraphpool::FgpError;

#[derive(Debug, thiserror::Error)]
pub enum HarnessError {
    #[error("{participant}/{incident}: incident at {incident_time}s leaves no full window after data start {start}s")]
    IncidentBeforeData { participant: String, incident: String, incident_time: f64, start: f64 },
    #[error("need at least {needed} participants, got {got}")]
    TooFewParticipants { needed: usize, got: usize },
    #[error("training data holds a single class")]
    SingleClassFold,
    #[error("no usable windows in the dataset")]
    NoWindows,
    #[error("invalid harness config: {0}")]
    InvalidConfig(String),
    #[error(transparent)]
    Dataset(#[from] DatasetError),
    #[error("{participant}/{incident}: {source}")]
    Trial {
        participant: String,
        incident: String,
        #[source]
        source: TrialError,
    },
    #[error("{participant}/{incident}: {source}")]
    Events {
        participant: String,
        incident: String,
        #[source]
        source: EventError,
    },
    #[error(transparent)]
    Graph(#[from] GraphError),
    #[error(transparent)]
    Model(#[from] FgpError),
    #[error(transparent)]
    Nn(#[from] sagaze_nn::NnError),
}
