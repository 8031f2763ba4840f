//! Trial recordings: sample stream schema, sidecar metadata, marker-frame
//! transform, and the SA labeling and SART scoring procedures.

use std::fmt;
use std::io::{Read, Write};

use nalgebra::{Quaternion, UnitQuaternion, Vector3};
use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Column header of the sample stream. Order is part of the file format.
pub const SAMPLE_COLUMNS: [&str; 17] = [
    "t",
    "gx",
    "gy",
    "gz",
    "ex",
    "ey",
    "ez",
    "pupil_mm",
    "blink",
    "on_virtual",
    "hx",
    "hy",
    "hz",
    "qw",
    "qx",
    "qy",
    "qz",
];

/// Pupil readings at or below this value are sensor dropouts.
pub const INVALID_PUPIL_MM: f64 = 1.0;

const UNIT_TOL: f64 = 1e-6;
const QUAT_TOL: f64 = 1e-3;

#[derive(Debug, Error)]
pub enum TrialError {
    #[error("line {line}: malformed row: {reason}")]
    MalformedRow { line: usize, reason: String },
    #[error("line {line}: timestamp {t} does not increase over previous {prev}")]
    NonMonotonicTime { line: usize, t: f64, prev: f64 },
    #[error("metadata is missing field `{0}`")]
    MissingMetaField(String),
    #[error("metadata is invalid: {0}")]
    InvalidMeta(String),
    #[error("pupil baseline stddev must be positive, got {0}")]
    InvalidBaseline(f64),
    #[error("sample stream has no rows")]
    EmptyStream,
    #[error("head pose quaternion has norm {0}, expected 1")]
    InvalidQuaternion(f64),
    #[error("i/o: {0}")]
    Io(#[from] std::io::Error),
}

/// Rigid transform from the headset frame into the marker frame.
///
/// The quaternion is stored as read from disk; it is validated when applied.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Pose {
    pub translation: Vector3<f64>,
    pub rotation: Quaternion<f64>,
}

impl Pose {
    pub fn identity() -> Self {
        Self { translation: Vector3::zeros(), rotation: Quaternion::identity() }
    }

    pub fn new(translation: Vector3<f64>, rotation: UnitQuaternion<f64>) -> Self {
        Self { translation, rotation: rotation.into_inner() }
    }

    fn unit_rotation(&self) -> Result<UnitQuaternion<f64>, TrialError> {
        let norm = self.rotation.norm();
        if !norm.is_finite() || (norm - 1.0).abs() > QUAT_TOL {
            return Err(TrialError::InvalidQuaternion(norm));
        }
        Ok(UnitQuaternion::from_quaternion(self.rotation))
    }
}

impl Default for Pose {
    fn default() -> Self {
        Self::identity()
    }
}

/// One eye-tracker record.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GazeSample {
    pub t: f64,
    /// Cyclopean gaze direction, unit length.
    pub gaze_dir: Vector3<f64>,
    /// Cyclopean eye center in meters.
    pub eye_center: Vector3<f64>,
    pub pupil_mm: f64,
    pub blink: bool,
    pub on_virtual: bool,
    pub head_pose: Pose,
}

impl GazeSample {
    pub fn pupil_valid(&self) -> bool {
        self.pupil_mm.is_finite() && self.pupil_mm > INVALID_PUPIL_MM
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Incident {
    Bleeding,
    Vomiting,
}

impl fmt::Display for Incident {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Incident::Bleeding => "bleeding",
            Incident::Vomiting => "vomiting",
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SaLabel {
    Good,
    Poor,
}

impl SaLabel {
    /// Class index used by the classifiers: Good = 0, Poor = 1.
    pub fn class_index(self) -> usize {
        match self {
            SaLabel::Good => 0,
            SaLabel::Poor => 1,
        }
    }

    pub fn from_class_index(i: usize) -> Self {
        if i == 0 {
            SaLabel::Good
        } else {
            SaLabel::Poor
        }
    }
}

impl fmt::Display for SaLabel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            SaLabel::Good => "good",
            SaLabel::Poor => "poor",
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PupilBaseline {
    pub mean_mm: f64,
    pub std_mm: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrialRecording {
    pub participant_id: String,
    pub incident: Incident,
    pub incident_time: f64,
    pub sa_label: SaLabel,
    pub samples: Vec<GazeSample>,
    pub pupil_baseline: PupilBaseline,
}

impl TrialRecording {
    /// Copy of this trial with every sample moved into the marker frame.
    pub fn to_marker_frame(&self) -> Result<TrialRecording, TrialError> {
        let samples = self.samples.iter().map(to_marker_frame).collect::<Result<Vec<_>, _>>()?;
        Ok(TrialRecording { samples, ..self.clone() })
    }

    pub fn meta(&self) -> TrialMeta {
        TrialMeta {
            participant_id: self.participant_id.clone(),
            incident: self.incident,
            incident_time_s: self.incident_time,
            sa_label: self.sa_label,
            pupil_baseline_mean_mm: self.pupil_baseline.mean_mm,
            pupil_baseline_std_mm: self.pupil_baseline.std_mm,
        }
    }
}

/// Sidecar metadata document of a trial.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrialMeta {
    pub participant_id: String,
    pub incident: Incident,
    pub incident_time_s: f64,
    pub sa_label: SaLabel,
    pub pupil_baseline_mean_mm: f64,
    pub pupil_baseline_std_mm: f64,
}

const META_FIELDS: [&str; 6] =
    ["participant_id", "incident", "incident_time_s", "sa_label", "pupil_baseline_mean_mm", "pupil_baseline_std_mm"];

impl TrialMeta {
    pub fn from_json(text: &str) -> Result<Self, TrialError> {
        let value: serde_json::Value =
            serde_json::from_str(text).map_err(|e| TrialError::InvalidMeta(e.to_string()))?;
        let obj = value.as_object().ok_or_else(|| TrialError::InvalidMeta("expected a JSON object".into()))?;
        for field in META_FIELDS {
            if !obj.contains_key(field) {
                return Err(TrialError::MissingMetaField(field.to_string()));
            }
        }
        serde_json::from_value(value).map_err(|e| TrialError::InvalidMeta(e.to_string()))
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("metadata serializes")
    }
}

/// Parse a sample stream and its metadata into a validated trial.
pub fn parse_trial<R: Read>(sample_stream: R, meta_json: &str) -> Result<TrialRecording, TrialError> {
    let meta = TrialMeta::from_json(meta_json)?;
    if !(meta.pupil_baseline_std_mm > 0.0) {
        return Err(TrialError::InvalidBaseline(meta.pupil_baseline_std_mm));
    }
    if !meta.pupil_baseline_mean_mm.is_finite() {
        return Err(TrialError::InvalidMeta("pupil_baseline_mean_mm is not finite".into()));
    }
    let samples = parse_samples(sample_stream)?;
    let last_t = samples.last().map(|s| s.t).ok_or(TrialError::EmptyStream)?;
    if !meta.incident_time_s.is_finite() || meta.incident_time_s > last_t {
        return Err(TrialError::InvalidMeta(format!(
            "incident_time_s {} is after the last sample at {last_t}",
            meta.incident_time_s
        )));
    }
    Ok(TrialRecording {
        participant_id: meta.participant_id,
        incident: meta.incident,
        incident_time: meta.incident_time_s,
        sa_label: meta.sa_label,
        samples,
        pupil_baseline: PupilBaseline { mean_mm: meta.pupil_baseline_mean_mm, std_mm: meta.pupil_baseline_std_mm },
    })
}

/// Parse the comma-separated sample stream.
pub fn parse_samples<R: Read>(reader: R) -> Result<Vec<GazeSample>, TrialError> {
    let mut rdr = csv::ReaderBuilder::new().has_headers(true).flexible(true).trim(csv::Trim::All).from_reader(reader);
    let header = rdr.headers().map_err(|e| malformed(1, e.to_string()))?.clone();
    if header.iter().ne(SAMPLE_COLUMNS.iter().copied()) {
        return Err(malformed(1, format!("header must be `{}`", SAMPLE_COLUMNS.join(","))));
    }

    let mut samples: Vec<GazeSample> = Vec::new();
    for (i, record) in rdr.records().enumerate() {
        let line = i + 2;
        let record = record.map_err(|e| malformed(line, e.to_string()))?;
        if record.len() != SAMPLE_COLUMNS.len() {
            return Err(malformed(line, format!("expected {} fields, found {}", SAMPLE_COLUMNS.len(), record.len())));
        }
        let num = |col: usize| -> Result<f64, TrialError> {
            let v: f64 = record[col].parse().map_err(|_| {
                malformed(line, format!("`{}` is not a number ({})", &record[col], SAMPLE_COLUMNS[col]))
            })?;
            if v.is_finite() {
                Ok(v)
            } else {
                Err(malformed(line, format!("{} is not finite", SAMPLE_COLUMNS[col])))
            }
        };
        let flag = |col: usize| -> Result<bool, TrialError> {
            match &record[col] {
                "0" => Ok(false),
                "1" => Ok(true),
                other => Err(malformed(line, format!("{} must be 0 or 1, got `{other}`", SAMPLE_COLUMNS[col]))),
            }
        };
        let sample = GazeSample {
            t: num(0)?,
            gaze_dir: Vector3::new(num(1)?, num(2)?, num(3)?),
            eye_center: Vector3::new(num(4)?, num(5)?, num(6)?),
            pupil_mm: num(7)?,
            blink: flag(8)?,
            on_virtual: flag(9)?,
            head_pose: Pose {
                translation: Vector3::new(num(10)?, num(11)?, num(12)?),
                rotation: Quaternion::new(num(13)?, num(14)?, num(15)?, num(16)?),
            },
        };
        if (sample.gaze_dir.norm() - 1.0).abs() > UNIT_TOL {
            return Err(malformed(line, "gaze direction is not unit length".into()));
        }
        if let Some(prev) = samples.last() {
            if !(sample.t > prev.t) {
                return Err(TrialError::NonMonotonicTime { line, t: sample.t, prev: prev.t });
            }
        }
        samples.push(sample);
    }
    if samples.is_empty() {
        return Err(TrialError::EmptyStream);
    }
    Ok(samples)
}

fn malformed(line: usize, reason: String) -> TrialError {
    TrialError::MalformedRow { line, reason }
}

/// Write samples in the stream schema. Floats use the shortest representation
/// that parses back to the same bits.
pub fn write_samples<W: Write>(samples: &[GazeSample], writer: W) -> Result<(), TrialError> {
    let mut w = csv::Writer::from_writer(writer);
    let to_io = |e: csv::Error| TrialError::Io(std::io::Error::other(e));
    w.write_record(SAMPLE_COLUMNS).map_err(to_io)?;
    for s in samples {
        let q = s.head_pose.rotation;
        let p = s.head_pose.translation;
        let row = [
            s.t.to_string(),
            s.gaze_dir.x.to_string(),
            s.gaze_dir.y.to_string(),
            s.gaze_dir.z.to_string(),
            s.eye_center.x.to_string(),
            s.eye_center.y.to_string(),
            s.eye_center.z.to_string(),
            s.pupil_mm.to_string(),
            (s.blink as u8).to_string(),
            (s.on_virtual as u8).to_string(),
            p.x.to_string(),
            p.y.to_string(),
            p.z.to_string(),
            q.w.to_string(),
            q.i.to_string(),
            q.j.to_string(),
            q.k.to_string(),
        ];
        w.write_record(&row).map_err(to_io)?;
    }
    w.flush()?;
    Ok(())
}

/// Express a sample in the marker frame. The returned pose is the identity.
pub fn to_marker_frame(sample: &GazeSample) -> Result<GazeSample, TrialError> {
    let rot = sample.head_pose.unit_rotation()?;
    let gaze_dir = (rot * sample.gaze_dir).normalize();
    let eye_center = rot * sample.eye_center + sample.head_pose.translation;
    Ok(GazeSample { gaze_dir, eye_center, head_pose: Pose::identity(), ..*sample })
}

/// Post-trial probe answers used to assign the SA label.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct SaAnswers {
    pub perception_correct: bool,
    pub comprehension_correct: bool,
    pub decision_sensible: bool,
    pub decision_matches_behavior: bool,
}

/// Hierarchical SA labeling: any failed level, checked from perception
/// upward, yields Poor.
pub fn label_sa(answers: &SaAnswers) -> SaLabel {
    if !answers.perception_correct {
        return SaLabel::Poor;
    }
    if !answers.comprehension_correct {
        return SaLabel::Poor;
    }
    if !answers.decision_sensible || !answers.decision_matches_behavior {
        return SaLabel::Poor;
    }
    SaLabel::Good
}

/// SART combined score: understanding − (demand − supply).
pub fn sart_score(understanding: i32, demand: i32, supply: i32) -> i32 {
    understanding - (demand - supply)
}
