//! Eye-tracking preprocessing for situational-awareness prediction: trial
//! ingestion, gaze event classification, window metrics, fixation graphs and
//! a synthetic trial generator.

pub mod dataset;
pub mod eval;
pub mod events;
pub mod graph;
pub mod metrics;
pub mod synth;
pub mod trial;

pub use eval::{evaluate, BinaryMetrics};
pub use events::{classify_events, ClassifierConfig, EventKind, GazeEvent};
pub use graph::{build_graph, FixationGraph, GraphConfig};
pub use metrics::{window_metrics, MetricVector};
pub use trial::{GazeSample, Incident, SaLabel, TrialRecording};
