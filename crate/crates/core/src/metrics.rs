//! Window-level attention metrics.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::events::{EventKind, GazeEvent, PupilZ};

#[derive(Debug, Error, PartialEq)]
pub enum MetricsError {
    #[error("window [{0}, {1}] is empty or reversed")]
    InvalidWindow(f64, f64),
    #[error("no events overlap window [{0}, {1}]")]
    EmptyWindow(f64, f64),
}

pub const METRIC_NAMES: [&str; 11] = ["FR", "MFD", "PFT", "MSA", "MSV", "MPSV", "VPFT", "VMFD", "VFR", "BR", "MPD"];

/// Attention metrics over one time window. `None` marks a metric whose
/// denominator is empty in this window.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct MetricVector {
    /// Fixations per second.
    pub fr: Option<f64>,
    /// Mean fixation duration, s.
    pub mfd: Option<f64>,
    /// Proportion of fixated time.
    pub pft: Option<f64>,
    /// Mean saccade amplitude, deg.
    pub msa: Option<f64>,
    /// Mean saccade velocity, deg/s.
    pub msv: Option<f64>,
    /// Mean peak saccade velocity, deg/s.
    pub mpsv: Option<f64>,
    /// Virtual-content share of fixated time.
    pub vpft: Option<f64>,
    /// Mean virtual fixation duration relative to MFD.
    pub vmfd: Option<f64>,
    /// Virtual-content share of fixation count.
    pub vfr: Option<f64>,
    /// Blinks per second.
    pub br: Option<f64>,
    /// Mean pupil z-score.
    pub mpd: Option<f64>,
}

impl MetricVector {
    /// Values in `METRIC_NAMES` order.
    pub fn values(&self) -> [Option<f64>; 11] {
        [self.fr, self.mfd, self.pft, self.msa, self.msv, self.mpsv, self.vpft, self.vmfd, self.vfr, self.br, self.mpd]
    }

    pub fn from_values(v: [Option<f64>; 11]) -> Self {
        Self {
            fr: v[0],
            mfd: v[1],
            pft: v[2],
            msa: v[3],
            msv: v[4],
            mpsv: v[5],
            vpft: v[6],
            vmfd: v[7],
            vfr: v[8],
            br: v[9],
            mpd: v[10],
        }
    }
}

fn mean(xs: impl IntoIterator<Item = f64>) -> Option<f64> {
    let (sum, n) = xs.into_iter().fold((0.0, 0usize), |(s, n), x| (s + x, n + 1));
    (n > 0).then(|| sum / n as f64)
}

fn ratio(num: f64, den: f64) -> Option<f64> {
    (den > 0.0).then(|| num / den)
}

/// Compute metrics over `[t0, t1)`.
///
/// Events straddling a border contribute only their inside portion to
/// durations and per-event means; rates count an event only when its onset
/// lies inside the window.
pub fn window_metrics(
    events: &[GazeEvent],
    pupil_z: &[PupilZ],
    t0: f64,
    t1: f64,
) -> Result<MetricVector, MetricsError> {
    if !(t1 > t0) {
        return Err(MetricsError::InvalidWindow(t0, t1));
    }
    let length = t1 - t0;
    let inside = |e: &GazeEvent| (e.t_end.min(t1) - e.t_start.max(t0)).max(0.0);
    let onset_inside = |e: &GazeEvent| e.t_start >= t0 && e.t_start < t1;

    let overlapping: Vec<(&GazeEvent, f64)> =
        events.iter().map(|e| (e, inside(e))).filter(|(e, d)| *d > 0.0 || onset_inside(e)).collect();
    if overlapping.is_empty() {
        return Err(MetricsError::EmptyWindow(t0, t1));
    }

    let fixations: Vec<(&GazeEvent, f64)> =
        overlapping.iter().copied().filter(|(e, d)| e.kind == EventKind::Fixation && *d > 0.0).collect();
    let saccades: Vec<&GazeEvent> =
        overlapping.iter().map(|(e, _)| *e).filter(|e| e.kind == EventKind::Saccade).collect();

    let fix_onsets = events.iter().filter(|e| e.kind == EventKind::Fixation && onset_inside(e));
    let (fix_count, virtual_count) =
        fix_onsets.fold((0usize, 0usize), |(n, v), e| (n + 1, v + e.is_virtual_fixation() as usize));
    let blink_count = events.iter().filter(|e| e.kind == EventKind::Blink && onset_inside(e)).count();

    let fixated: f64 = fixations.iter().map(|(_, d)| d).sum();
    let virtual_fixated: f64 = fixations.iter().filter(|(e, _)| e.is_virtual_fixation()).map(|(_, d)| d).sum();
    let mfd = mean(fixations.iter().map(|(_, d)| *d));
    let virtual_mfd = mean(fixations.iter().filter(|(e, _)| e.is_virtual_fixation()).map(|(_, d)| *d));

    Ok(MetricVector {
        fr: Some(fix_count as f64 / length),
        mfd,
        pft: Some(fixated / length),
        msa: mean(saccades.iter().filter_map(|e| e.amplitude)),
        msv: mean(saccades.iter().filter_map(|e| e.mean_velocity)),
        mpsv: mean(saccades.iter().filter_map(|e| e.peak_velocity)),
        vpft: ratio(virtual_fixated, fixated),
        vmfd: match (virtual_mfd, mfd) {
            (Some(v), Some(m)) => ratio(v, m),
            _ => None,
        },
        vfr: ratio(virtual_count as f64, fix_count as f64),
        br: Some(blink_count as f64 / length),
        mpd: mean(pupil_z.iter().filter(|p| p.t >= t0 && p.t < t1).map(|p| p.z)),
    })
}

pub const BASELINE_FEATURE_NAMES: [&str; 10] = ["FR", "MFD", "PFT", "MSA", "MSV", "MPSV", "VPFT", "VMFD", "VFR", "BR"];

/// Fixed-arity input of the classical baseline: every metric except pupil
/// dilation, absent values imputed as 0.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BaselineFeatures {
    pub values: [f64; 10],
    pub present: [bool; 10],
}

pub fn baseline_features(m: &MetricVector) -> BaselineFeatures {
    let all = m.values();
    let mut values = [0.0; 10];
    let mut present = [false; 10];
    for i in 0..10 {
        if let Some(v) = all[i] {
            values[i] = v;
            present[i] = true;
        }
    }
    BaselineFeatures { values, present }
}
