use serde::{Deserialize, Serialize};

use sagaze_core::events::{classify_events, normalize_pupil, ClassifierConfig, EventKind, GazeEvent, PupilZ};
use sagaze_core::graph::{build_graph, FixationGraph, GraphConfig};
use sagaze_core::metrics::{baseline_features, window_metrics};
use sagaze_core::trial::{Incident, SaLabel, TrialRecording};

use crate::HarnessError;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct WindowConfig {
    pub length_s: f64,
    /// How far before the incident the first window may start.
    pub lookback_s: f64,
    pub step_s: f64,
}

impl Default for WindowConfig {
    fn default() -> Self {
        Self { length_s: 7.0, lookback_s: 21.0, step_s: 1.0 }
    }
}

impl WindowConfig {
    pub fn validate(&self) -> Result<(), HarnessError> {
        if !(self.length_s > 0.0 && self.step_s > 0.0 && self.lookback_s >= self.length_s) {
            return Err(HarnessError::InvalidConfig(format!(
                "window length {} / step {} / lookback {} must satisfy 0 < length <= lookback, step > 0",
                self.length_s, self.step_s, self.lookback_s
            )));
        }
        Ok(())
    }

    /// Number of windows a trial with enough pre-incident data yields.
    pub fn max_windows(&self) -> usize {
        ((self.lookback_s - self.length_s) / self.step_s + 1e-9).floor() as usize + 1
    }
}

/// A trial after frame transformation, event classification and pupil
/// normalization.
#[derive(Debug, Clone, PartialEq)]
pub struct ProcessedTrial {
    pub participant_id: String,
    pub incident: Incident,
    pub incident_time: f64,
    pub label: SaLabel,
    pub start_time: f64,
    pub events: Vec<GazeEvent>,
    pub pupil_z: Vec<PupilZ>,
}

pub fn process_trial(trial: &TrialRecording, cfg: &ClassifierConfig) -> Result<ProcessedTrial, HarnessError> {
    let participant = trial.participant_id.clone();
    let incident = trial.incident.to_string();
    let marker = trial.to_marker_frame().map_err(|source| HarnessError::Trial {
        participant: participant.clone(),
        incident: incident.clone(),
        source,
    })?;
    let events_err =
        |source| HarnessError::Events { participant: participant.clone(), incident: incident.clone(), source };
    let events = classify_events(&marker.samples, cfg).map_err(events_err)?;
    let pupil_z = normalize_pupil(&marker).map_err(events_err)?;
    Ok(ProcessedTrial {
        participant_id: trial.participant_id.clone(),
        incident: trial.incident,
        incident_time: trial.incident_time,
        label: trial.sa_label,
        start_time: marker.samples.first().map_or(0.0, |s| s.t),
        events,
        pupil_z,
    })
}

/// One training/evaluation example.
#[derive(Debug, Clone, PartialEq)]
pub struct WindowSample {
    pub participant_id: String,
    pub incident: Incident,
    pub window: [f64; 2],
    pub graph: FixationGraph,
    pub features: [f64; 10],
    pub label: SaLabel,
}

/// Window start times ending no later than the incident, clipped to the
/// data start.
pub fn window_starts(start_time: f64, incident_time: f64, cfg: &WindowConfig) -> Vec<f64> {
    (0..cfg.max_windows())
        .map(|k| incident_time - cfg.lookback_s + k as f64 * cfg.step_s)
        .filter(|&t0| t0 >= start_time - 1e-9)
        .collect()
}

/// Fixations overlapping `[t0, t1)`, trimmed to the window.
pub fn window_fixations(events: &[GazeEvent], t0: f64, t1: f64) -> Vec<GazeEvent> {
    events
        .iter()
        .filter(|e| e.kind == EventKind::Fixation && e.t_end > t0 && e.t_start < t1)
        .map(|e| {
            let mut f = e.clone();
            f.t_start = e.t_start.max(t0);
            f.t_end = e.t_end.min(t1);
            f.duration = f.t_end - f.t_start;
            f
        })
        .collect()
}

pub fn slice_windows(
    trial: &ProcessedTrial,
    windows: &WindowConfig,
    graph_cfg: &GraphConfig,
) -> Result<Vec<WindowSample>, HarnessError> {
    windows.validate()?;
    let starts = window_starts(trial.start_time, trial.incident_time, windows);
    if starts.is_empty() {
        return Err(HarnessError::IncidentBeforeData {
            participant: trial.participant_id.clone(),
            incident: trial.incident.to_string(),
            incident_time: trial.incident_time,
            start: trial.start_time,
        });
    }
    let mut out = Vec::with_capacity(starts.len());
    for t0 in starts {
        let t1 = t0 + windows.length_s;
        let fixations = window_fixations(&trial.events, t0, t1);
        if fixations.is_empty() {
            log::warn!(
                "{}/{}: window [{t0:.2}, {t1:.2}) has no fixation, dropped",
                trial.participant_id,
                trial.incident
            );
            continue;
        }
        let metrics = window_metrics(&trial.events, &trial.pupil_z, t0, t1).expect("window with a fixation has events");
        out.push(WindowSample {
            participant_id: trial.participant_id.clone(),
            incident: trial.incident,
            window: [t0, t1],
            graph: build_graph(&fixations, trial.label, graph_cfg)?,
            features: baseline_features(&metrics).values,
            label: trial.label,
        });
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn full_lookback_gives_fifteen_windows() {
        let s = window_starts(0.0, 30.0, &WindowConfig::default());
        assert_eq!(s, (9..=23).map(f64::from).collect::<Vec<_>>());
    }

    #[test]
    fn late_start_clips_windows() {
        assert_eq!(window_starts(0.0, 10.0, &WindowConfig::default()), vec![0.0, 1.0, 2.0, 3.0]);
        assert!(window_starts(0.0, 6.0, &WindowConfig::default()).is_empty());
    }

    #[test]
    fn bad_window_config() {
        let cfg = WindowConfig { length_s: 30.0, ..WindowConfig::default() };
        assert!(cfg.validate().is_err());
    }
}
