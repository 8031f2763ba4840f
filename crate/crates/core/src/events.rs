//! Gaze event classification with a head-motion-dependent velocity threshold.
//!
//! Each non-blink sample is slow-phase when its angular velocity is under the
//! active threshold: the high threshold while the head moves faster than
//! `head_speed_threshold`, the low one otherwise. Slow-phase runs (fixations
//! and smooth pursuits alike) become fixations; everything else that is not a
//! blink becomes a saccade.

use std::fmt;
use std::io::Write;

use nalgebra::Vector3;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::trial::{GazeSample, TrialRecording};

/// Slack when comparing run durations against the configured minimum, so a
/// run of exactly `k` sample periods is not lost to rounding of timestamps.
const DURATION_SLACK: f64 = 1e-9;

#[derive(Debug, Error, PartialEq)]
pub enum EventError {
    #[error("need at least 2 samples, got {0}")]
    TooFewSamples(usize),
    #[error("sample {0} is not later than its predecessor")]
    UnsortedInput(usize),
    #[error("invalid classifier config: {0}")]
    InvalidConfig(String),
    #[error("pupil baseline stddev must be positive, got {0}")]
    InvalidBaseline(f64),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum EventKind {
    Fixation,
    Saccade,
    Blink,
}

impl fmt::Display for EventKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            EventKind::Fixation => "fixation",
            EventKind::Saccade => "saccade",
            EventKind::Blink => "blink",
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ClassifierConfig {
    /// deg/s, used while the head is still.
    pub low_threshold: f64,
    /// deg/s, used while the head moves.
    pub high_threshold: f64,
    /// cm/s.
    pub head_speed_threshold: f64,
    /// Hz.
    pub sample_rate: f64,
    /// Seconds. Shorter slow-phase runs are folded into saccades.
    pub min_fixation_duration: f64,
    /// Seconds. Same-kind events separated by a shorter event are joined.
    pub max_gap_merge: f64,
}

impl Default for ClassifierConfig {
    fn default() -> Self {
        Self {
            low_threshold: 30.0,
            high_threshold: 100.0,
            head_speed_threshold: 16.8,
            sample_rate: 60.0,
            min_fixation_duration: 0.05,
            max_gap_merge: 0.0,
        }
    }
}

impl ClassifierConfig {
    pub fn validate(&self) -> Result<(), EventError> {
        if !(self.low_threshold > 0.0) || !(self.high_threshold > self.low_threshold) {
            return Err(EventError::InvalidConfig(format!(
                "need high_threshold > low_threshold > 0, got {} / {}",
                self.high_threshold, self.low_threshold
            )));
        }
        if !(self.sample_rate > 0.0) {
            return Err(EventError::InvalidConfig("sample_rate must be positive".into()));
        }
        if !(self.min_fixation_duration >= 0.0) || !(self.max_gap_merge >= 0.0) {
            return Err(EventError::InvalidConfig("durations must be non-negative".into()));
        }
        if !(self.head_speed_threshold >= 0.0) {
            return Err(EventError::InvalidConfig("head_speed_threshold must be non-negative".into()));
        }
        Ok(())
    }
}

/// A classified fixation, saccade or blink.
///
/// Events tile the stream: an event ends where the next one starts, the last
/// one ends at the final sample.
#[derive(Debug, Clone, PartialEq)]
pub struct GazeEvent {
    pub kind: EventKind,
    pub t_start: f64,
    pub t_end: f64,
    pub duration: f64,
    /// Index of the first member sample.
    pub first_sample: usize,
    /// Index of the last member sample (inclusive).
    pub last_sample: usize,
    pub mean_eye_center: Vector3<f64>,
    /// Fixations: (azimuth, elevation) of the mean gaze direction, radians.
    pub centroid_dir: Option<(f64, f64)>,
    /// Fixations: majority vote over member samples.
    pub on_virtual: Option<bool>,
    /// Saccades: degrees between launch and landing direction.
    pub amplitude: Option<f64>,
    /// Saccades: deg/s.
    pub mean_velocity: Option<f64>,
    /// Saccades: deg/s.
    pub peak_velocity: Option<f64>,
    /// Saccades: summed sample-to-sample rotation, degrees. Debug only.
    pub path_length: Option<f64>,
}

impl GazeEvent {
    pub fn sample_count(&self) -> usize {
        self.last_sample - self.first_sample + 1
    }

    pub fn is_virtual_fixation(&self) -> bool {
        self.kind == EventKind::Fixation && self.on_virtual == Some(true)
    }

    /// Unit gaze direction of a fixation centroid.
    pub fn centroid_vector(&self) -> Option<Vector3<f64>> {
        self.centroid_dir.map(|(az, el)| spherical_to_direction(az, el))
    }
}

/// (azimuth, elevation) in radians; azimuth measured in the x–y plane from +x,
/// elevation toward +z.
pub fn direction_to_spherical(dir: &Vector3<f64>) -> (f64, f64) {
    let d = dir.normalize();
    (d.y.atan2(d.x), d.z.clamp(-1.0, 1.0).asin())
}

pub fn spherical_to_direction(azimuth: f64, elevation: f64) -> Vector3<f64> {
    Vector3::new(elevation.cos() * azimuth.cos(), elevation.cos() * azimuth.sin(), elevation.sin())
}

/// Angle between two unit vectors in degrees.
pub fn angle_deg(a: &Vector3<f64>, b: &Vector3<f64>) -> f64 {
    a.dot(b).clamp(-1.0, 1.0).acos().to_degrees()
}

fn check_sorted(samples: &[GazeSample]) -> Result<(), EventError> {
    if samples.len() < 2 {
        return Err(EventError::TooFewSamples(samples.len()));
    }
    match samples.windows(2).position(|w| !(w[1].t > w[0].t)) {
        Some(i) => Err(EventError::UnsortedInput(i + 1)),
        None => Ok(()),
    }
}

/// Forward-difference angular velocity, deg/s; `n - 1` values.
pub fn angular_velocity(samples: &[GazeSample]) -> Result<Vec<f64>, EventError> {
    if samples.len() < 2 {
        return Err(EventError::TooFewSamples(samples.len()));
    }
    Ok(samples.windows(2).map(|w| angle_deg(&w[0].gaze_dir, &w[1].gaze_dir) / (w[1].t - w[0].t)).collect())
}

/// Forward-difference eye-center speed, cm/s; `n - 1` values.
pub fn head_speed(samples: &[GazeSample]) -> Result<Vec<f64>, EventError> {
    if samples.len() < 2 {
        return Err(EventError::TooFewSamples(samples.len()));
    }
    Ok(samples.windows(2).map(|w| 100.0 * (w[1].eye_center - w[0].eye_center).norm() / (w[1].t - w[0].t)).collect())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Phase {
    Slow,
    Fast,
    Blink,
}

#[derive(Debug, Clone, Copy)]
struct Run {
    phase: Phase,
    first: usize,
    last: usize,
}

fn runs_of(phases: impl IntoIterator<Item = Phase>) -> Vec<Run> {
    let mut runs: Vec<Run> = Vec::new();
    for (i, p) in phases.into_iter().enumerate() {
        match runs.last_mut() {
            Some(r) if r.phase == p => r.last = i,
            _ => runs.push(Run { phase: p, first: i, last: i }),
        }
    }
    runs
}

fn coalesce(runs: Vec<Run>) -> Vec<Run> {
    let mut out: Vec<Run> = Vec::with_capacity(runs.len());
    for r in runs {
        match out.last_mut() {
            Some(prev) if prev.phase == r.phase => prev.last = r.last,
            _ => out.push(r),
        }
    }
    out
}

/// Start/end times of runs that tile the stream.
fn run_span(runs: &[Run], i: usize, samples: &[GazeSample], sample_rate: f64) -> (f64, f64) {
    let t_start = samples[runs[i].first].t;
    let t_end = match runs.get(i + 1) {
        Some(next) => samples[next.first].t,
        None => samples[runs[i].last].t,
    };
    if t_end > t_start {
        (t_start, t_end)
    } else {
        // single-sample trailing run
        (t_start, t_start + 1.0 / sample_rate)
    }
}

/// Classify a marker-frame, time-sorted sample stream into events.
pub fn classify_events(samples: &[GazeSample], cfg: &ClassifierConfig) -> Result<Vec<GazeEvent>, EventError> {
    cfg.validate()?;
    check_sorted(samples)?;
    let mut velocity = angular_velocity(samples)?;
    velocity.push(*velocity.last().expect("n >= 2"));
    let mut head = head_speed(samples)?;
    head.push(*head.last().expect("n >= 2"));

    let phases = samples.iter().enumerate().map(|(i, s)| {
        if s.blink {
            Phase::Blink
        } else {
            let threshold = if head[i] > cfg.head_speed_threshold { cfg.high_threshold } else { cfg.low_threshold };
            if velocity[i] < threshold {
                Phase::Slow
            } else {
                Phase::Fast
            }
        }
    });
    let mut runs = runs_of(phases);

    // Fold short slow-phase runs into the surrounding saccadic motion.
    let short: Vec<bool> = (0..runs.len())
        .map(|i| {
            let (a, b) = run_span(&runs, i, samples, cfg.sample_rate);
            runs[i].phase == Phase::Slow && b - a < cfg.min_fixation_duration - DURATION_SLACK
        })
        .collect();
    for (r, s) in runs.iter_mut().zip(short) {
        if s {
            r.phase = Phase::Fast;
        }
    }
    let mut runs = coalesce(runs);

    if cfg.max_gap_merge > 0.0 {
        let mut i = 0;
        while i + 2 < runs.len() {
            let (a, b) = run_span(&runs, i + 1, samples, cfg.sample_rate);
            let joinable = runs[i].phase == runs[i + 2].phase
                && runs[i].phase != Phase::Blink
                && runs[i + 1].phase != Phase::Blink
                && b - a <= cfg.max_gap_merge;
            if joinable {
                runs[i].last = runs[i + 2].last;
                runs.drain(i + 1..i + 3);
            } else {
                i += 1;
            }
        }
    }

    Ok((0..runs.len())
        .map(|i| {
            let (t_start, t_end) = run_span(&runs, i, samples, cfg.sample_rate);
            build_event(runs[i], t_start, t_end, samples, &velocity)
        })
        .collect())
}

fn build_event(run: Run, t_start: f64, t_end: f64, samples: &[GazeSample], velocity: &[f64]) -> GazeEvent {
    let members = &samples[run.first..=run.last];
    let n = members.len() as f64;
    let mean_eye_center = members.iter().map(|s| s.eye_center).sum::<Vector3<f64>>() / n;
    let kind = match run.phase {
        Phase::Slow => EventKind::Fixation,
        Phase::Fast => EventKind::Saccade,
        Phase::Blink => EventKind::Blink,
    };
    let mut event = GazeEvent {
        kind,
        t_start,
        t_end,
        duration: t_end - t_start,
        first_sample: run.first,
        last_sample: run.last,
        mean_eye_center,
        centroid_dir: None,
        on_virtual: None,
        amplitude: None,
        mean_velocity: None,
        peak_velocity: None,
        path_length: None,
    };
    match kind {
        EventKind::Fixation => {
            let sum: Vector3<f64> = members.iter().map(|s| s.gaze_dir).sum();
            let centroid = if sum.norm() > 0.0 { sum.normalize() } else { members[0].gaze_dir };
            event.centroid_dir = Some(direction_to_spherical(&centroid));
            let virtual_count = members.iter().filter(|s| s.on_virtual).count();
            event.on_virtual = Some(2 * virtual_count > members.len());
        }
        EventKind::Saccade => {
            // Movement assigned to a sample ends at the following one.
            let landing = (run.last + 1).min(samples.len() - 1);
            event.amplitude = Some(angle_deg(&samples[run.first].gaze_dir, &samples[landing].gaze_dir));
            let vels = &velocity[run.first..=run.last];
            event.mean_velocity = Some(vels.iter().sum::<f64>() / n);
            event.peak_velocity = Some(vels.iter().copied().fold(0.0, f64::max));
            event.path_length =
                Some((run.first..landing).map(|i| angle_deg(&samples[i].gaze_dir, &samples[i + 1].gaze_dir)).sum());
        }
        EventKind::Blink => {}
    }
    event
}

/// Baseline-normalized pupil size of one valid sample.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PupilZ {
    pub index: usize,
    pub t: f64,
    pub z: f64,
}

/// Z-scores of valid pupil readings against the trial's practice baseline.
/// Dropout readings are skipped; `index` refers back to the sample.
pub fn normalize_pupil(trial: &TrialRecording) -> Result<Vec<PupilZ>, EventError> {
    let base = trial.pupil_baseline;
    if !(base.std_mm > 0.0) {
        return Err(EventError::InvalidBaseline(base.std_mm));
    }
    Ok(trial
        .samples
        .iter()
        .enumerate()
        .filter(|(_, s)| s.pupil_valid())
        .map(|(index, s)| PupilZ { index, t: s.t, z: (s.pupil_mm - base.mean_mm) / base.std_mm })
        .collect())
}

pub const EVENT_COLUMNS: [&str; 10] =
    ["kind", "t_start", "t_end", "duration", "az", "el", "on_virtual", "amplitude", "mean_vel", "peak_vel"];

/// Export events as comma-separated text; inapplicable fields are empty.
pub fn write_events<W: Write>(events: &[GazeEvent], writer: W) -> std::io::Result<()> {
    let mut w = csv::Writer::from_writer(writer);
    let opt = |v: Option<f64>| v.map(|x| x.to_string()).unwrap_or_default();
    w.write_record(EVENT_COLUMNS).map_err(std::io::Error::other)?;
    for e in events {
        let (az, el) = match e.centroid_dir {
            Some((a, b)) => (Some(a), Some(b)),
            None => (None, None),
        };
        let row = [
            e.kind.to_string(),
            e.t_start.to_string(),
            e.t_end.to_string(),
            e.duration.to_string(),
            opt(az),
            opt(el),
            e.on_virtual.map(|v| (v as u8).to_string()).unwrap_or_default(),
            opt(e.amplitude),
            opt(e.mean_velocity),
            opt(e.peak_velocity),
        ];
        w.write_record(&row).map_err(std::io::Error::other)?;
    }
    w.flush()
}
