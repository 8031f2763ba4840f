//! Parametric synthetic gaze streams in the on-disk trial format.
//!
//! The scene is a rescuer kneeling beside a mannequin lying on the marker
//! plane (z = 0, z up). Fixations dwell on points of the mannequin, on a
//! virtual compression visualizer lying on its chest, on a floating virtual
//! timer, or on a bystander. Head bobbing from chest compressions moves the
//! eye center; gaze stays locked on the target during a fixation, so gaze
//! direction in the marker frame drifts as in a vestibulo-ocular response.

use std::path::Path;

use nalgebra::{Rotation3, Unit, UnitQuaternion, Vector3};
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, LogNormal, Normal};
use serde::{Deserialize, Serialize};

use crate::dataset::{save_trial, DatasetError};
use crate::trial::{GazeSample, Incident, Pose, PupilBaseline, SaLabel, TrialRecording};

const CHEST: Vector3<f64> = Vector3::new(0.0, 0.0, 0.0);
const TIMER: Vector3<f64> = Vector3::new(0.0, 0.2, 0.25);
const BYSTANDER: Vector3<f64> = Vector3::new(-0.6, 1.6, 0.75);
const EYE_BASE: Vector3<f64> = Vector3::new(0.42, -0.45, 0.62);
/// Eye position relative to the headset origin, headset frame.
const EYE_OFFSET: Vector3<f64> = Vector3::new(0.0, 0.07, -0.03);
/// On-mannequin target area (half extents in x and y around the chest).
const BODY_HALF_X: f64 = 0.45;
const BODY_HALF_Y: f64 = 0.18;
const VISUALIZER_RADIUS: f64 = 0.04;
const TIMER_SHARE: f64 = 0.1;
const JITTER_DEG: f64 = 0.02;

/// Behavioral profile of one synthetic trial.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SynthProfile {
    pub label: SaLabel,
    /// Mean fixation duration, seconds (log-normal).
    pub fixation_mean_s: f64,
    /// Log-space standard deviation of fixation duration.
    pub fixation_sigma: f64,
    /// Saccade amplitude on the mannequin, degrees (normal, clipped at 0.5).
    /// A mean of 0 disables saccades altogether.
    pub saccade_amplitude_mean_deg: f64,
    pub saccade_amplitude_sd_deg: f64,
    /// Peak velocity per degree of amplitude, deg/s per deg.
    pub main_sequence_slope: f64,
    /// Lower bound on saccade peak velocity, deg/s.
    pub peak_velocity_floor: f64,
    pub p_virtual_fixation: f64,
    /// Probability of looking at the bystander instead of the mannequin.
    pub p_offboard_fixation: f64,
    /// Blinks per second.
    pub blink_rate: f64,
    /// Vertical head bob from compressions, cm.
    pub head_bob_amplitude_cm: f64,
    pub head_bob_period_s: f64,
    pub pupil_mean_mm: f64,
    pub pupil_sd_mm: f64,
    /// Fraction of samples with a dropout pupil reading.
    pub pupil_dropout: f64,
    pub sample_rate: f64,
    pub trial_duration_s: f64,
}

impl Default for SynthProfile {
    fn default() -> Self {
        Self::good()
    }
}

impl SynthProfile {
    /// Wide, fast scanning of the real scene; little dwelling on overlays.
    pub fn good() -> Self {
        Self {
            label: SaLabel::Good,
            fixation_mean_s: 0.32,
            fixation_sigma: 0.35,
            saccade_amplitude_mean_deg: 12.0,
            saccade_amplitude_sd_deg: 3.5,
            main_sequence_slope: 30.0,
            peak_velocity_floor: 200.0,
            p_virtual_fixation: 0.12,
            p_offboard_fixation: 0.05,
            blink_rate: 0.25,
            head_bob_amplitude_cm: 2.5,
            head_bob_period_s: 0.55,
            pupil_mean_mm: 4.0,
            pupil_sd_mm: 0.35,
            pupil_dropout: 0.12,
            sample_rate: 60.0,
            trial_duration_s: 48.0,
        }
    }

    /// Narrow scanning with long dwells, drawn toward virtual content.
    pub fn poor() -> Self {
        Self {
            label: SaLabel::Poor,
            fixation_mean_s: 0.45,
            saccade_amplitude_mean_deg: 5.0,
            saccade_amplitude_sd_deg: 2.0,
            p_virtual_fixation: 0.45,
            blink_rate: 0.3,
            pupil_mean_mm: 4.2,
            ..Self::good()
        }
    }

    pub fn default_for(label: SaLabel) -> Self {
        match label {
            SaLabel::Good => Self::good(),
            SaLabel::Poor => Self::poor(),
        }
    }

    pub fn validate(&self) -> Result<(), String> {
        let probs = [self.p_virtual_fixation, self.p_offboard_fixation, self.pupil_dropout];
        if probs.iter().any(|p| !(0.0..=1.0).contains(p)) || self.p_virtual_fixation + self.p_offboard_fixation > 1.0 {
            return Err("probabilities must lie in [0, 1]".into());
        }
        let positive = [
            self.fixation_mean_s,
            self.main_sequence_slope,
            self.peak_velocity_floor,
            self.head_bob_period_s,
            self.pupil_mean_mm,
            self.pupil_sd_mm,
            self.sample_rate,
            self.trial_duration_s,
        ];
        if positive.iter().any(|x| !(*x > 0.0)) {
            return Err("scales must be positive".into());
        }
        let non_negative = [
            self.fixation_sigma,
            self.saccade_amplitude_mean_deg,
            self.saccade_amplitude_sd_deg,
            self.blink_rate,
            self.head_bob_amplitude_cm,
        ];
        if non_negative.iter().any(|x| !(*x >= 0.0)) {
            return Err("spreads and rates must be non-negative".into());
        }
        Ok(())
    }

    /// Copy with per-user multiplicative jitter applied.
    fn jittered(&self, user: &UserTraits) -> Self {
        Self {
            fixation_mean_s: self.fixation_mean_s * user.fixation,
            saccade_amplitude_mean_deg: self.saccade_amplitude_mean_deg * user.amplitude,
            p_virtual_fixation: (self.p_virtual_fixation * user.virtual_pull).min(1.0 - self.p_offboard_fixation),
            blink_rate: self.blink_rate * user.blink,
            head_bob_amplitude_cm: self.head_bob_amplitude_cm * user.head_bob,
            pupil_mean_mm: self.pupil_mean_mm * user.pupil,
            ..self.clone()
        }
    }
}

/// Per-user multipliers shared by both trials of a participant.
#[derive(Debug, Clone, Copy)]
struct UserTraits {
    fixation: f64,
    amplitude: f64,
    virtual_pull: f64,
    blink: f64,
    head_bob: f64,
    pupil: f64,
}

impl UserTraits {
    fn draw(rng: &mut impl Rng, spread: f64) -> Self {
        let mut f = || 1.0 + rng.random_range(-spread..=spread);
        Self { fixation: f(), amplitude: f(), virtual_pull: f(), blink: f(), head_bob: f(), pupil: f() }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
enum Target {
    Body(Vector3<f64>),
    Visualizer(Vector3<f64>),
    Timer,
    Bystander,
}

impl Target {
    fn point(&self) -> Vector3<f64> {
        match *self {
            Target::Body(p) | Target::Visualizer(p) => p,
            Target::Timer => TIMER,
            Target::Bystander => BYSTANDER,
        }
    }

    fn is_virtual(&self) -> bool {
        matches!(self, Target::Visualizer(_) | Target::Timer)
    }
}

struct Scene<'a> {
    profile: &'a SynthProfile,
    phase: f64,
}

impl Scene<'_> {
    fn eye(&self, t: f64) -> Vector3<f64> {
        let p = self.profile;
        let bob =
            p.head_bob_amplitude_cm / 100.0 * (std::f64::consts::TAU * t / p.head_bob_period_s + self.phase).sin();
        let sway = 0.03 * (std::f64::consts::TAU * t / 7.0 + self.phase).sin();
        EYE_BASE + Vector3::new(sway, 0.0, bob)
    }

    fn head_rotation(&self, t: f64) -> UnitQuaternion<f64> {
        let yaw = 2.3 + 0.05 * (std::f64::consts::TAU * t / 3.0 + self.phase).sin();
        let pitch = -0.6 + 0.03 * (std::f64::consts::TAU * t / 5.0).cos();
        UnitQuaternion::from_euler_angles(0.0, pitch, yaw)
    }
}

fn in_body(p: &Vector3<f64>) -> bool {
    p.x.abs() <= BODY_HALF_X && p.y.abs() <= BODY_HALF_Y
}

fn hit_plane(origin: &Vector3<f64>, dir: &Vector3<f64>) -> Option<Vector3<f64>> {
    if dir.z >= -1e-9 {
        return None;
    }
    let t = -origin.z / dir.z;
    Some(origin + dir * t)
}

fn random_body_point(rng: &mut impl Rng) -> Vector3<f64> {
    Vector3::new(rng.random_range(-BODY_HALF_X..BODY_HALF_X), rng.random_range(-BODY_HALF_Y..BODY_HALF_Y), 0.0)
}

fn perpendicular_axis(d: &Vector3<f64>, angle: f64) -> Unit<Vector3<f64>> {
    let helper = if d.x.abs() < 0.9 { Vector3::x() } else { Vector3::y() };
    let u = d.cross(&helper).normalize();
    let v = d.cross(&u);
    Unit::new_normalize(u * angle.cos() + v * angle.sin())
}

/// Next dwell target. Saccades onto the body start from `anchor`, the last
/// point looked at on the mannequin plane.
fn next_target(rng: &mut impl Rng, p: &SynthProfile, eye: &Vector3<f64>, anchor: &Vector3<f64>) -> Target {
    let u: f64 = rng.random();
    if u < p.p_virtual_fixation {
        if rng.random::<f64>() < TIMER_SHARE {
            return Target::Timer;
        }
        let r = VISUALIZER_RADIUS * rng.random::<f64>().sqrt();
        let a = rng.random_range(0.0..std::f64::consts::TAU);
        return Target::Visualizer(CHEST + Vector3::new(r * a.cos(), r * a.sin(), 0.0));
    }
    if u < p.p_virtual_fixation + p.p_offboard_fixation {
        return Target::Bystander;
    }
    let from = (anchor - eye).normalize();
    let amp = Normal::new(p.saccade_amplitude_mean_deg, p.saccade_amplitude_sd_deg.max(1e-12)).expect("finite normal");
    let mut last_hit = None;
    for _ in 0..30 {
        let a = amp.sample(rng).max(0.5).to_radians();
        let axis = perpendicular_axis(&from, rng.random_range(0.0..std::f64::consts::TAU));
        let dir = Rotation3::from_axis_angle(&axis, a) * from;
        if let Some(hit) = hit_plane(eye, &dir) {
            if in_body(&hit) {
                return Target::Body(hit);
            }
            last_hit = Some(hit);
        }
    }
    let h = last_hit.unwrap_or(*anchor);
    Target::Body(Vector3::new(h.x.clamp(-BODY_HALF_X, BODY_HALF_X), h.y.clamp(-BODY_HALF_Y, BODY_HALF_Y), 0.0))
}

fn jitter(rng: &mut impl Rng, d: &Vector3<f64>) -> Vector3<f64> {
    let n = Normal::new(0.0, JITTER_DEG.to_radians()).expect("finite normal");
    let a = perpendicular_axis(d, 0.0);
    let b = Unit::new_normalize(d.cross(&a));
    let r = Rotation3::from_axis_angle(&a, n.sample(rng)) * Rotation3::from_axis_angle(&b, n.sample(rng));
    (r * d).normalize()
}

/// Cumulative share of a saccade covered at fraction `x` of its duration
/// for a sin² velocity profile.
fn saccade_progress(x: f64) -> f64 {
    x - (std::f64::consts::TAU * x).sin() / std::f64::consts::TAU
}

struct Frame {
    dir: Vector3<f64>,
    blink: bool,
    on_virtual: bool,
}

/// Generate one trial. Deterministic in `seed`.
pub fn generate_trial(profile: &SynthProfile, participant_id: &str, incident: Incident, seed: u64) -> TrialRecording {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let p = profile;
    let scene = Scene { profile: p, phase: rng.random_range(0.0..std::f64::consts::TAU) };
    let n = (p.trial_duration_s * p.sample_rate).ceil() as usize + 1;
    let dt = 1.0 / p.sample_rate;
    let time = |i: usize| i as f64 * dt;
    let saccades_enabled = p.saccade_amplitude_mean_deg > 0.0;

    let mu = p.fixation_mean_s.ln() - p.fixation_sigma * p.fixation_sigma / 2.0;
    let dwell = LogNormal::new(mu, p.fixation_sigma.max(1e-12)).expect("finite lognormal");

    let mut frames: Vec<Frame> = Vec::with_capacity(n);
    let mut target = Target::Body(random_body_point(&mut rng));
    let mut anchor = target.point();
    while frames.len() < n {
        // fixation
        let samples = ((dwell.sample(&mut rng).min(5.0) * p.sample_rate).round() as usize).max(4);
        let blink_at = if rng.random::<f64>() < 1.0 - (-p.blink_rate * samples as f64 * dt).exp() {
            Some(rng.random_range(1..samples))
        } else {
            None
        };
        let mut k = 0;
        while k < samples && frames.len() < n {
            if blink_at == Some(k) {
                let len =
                    rng.random_range((0.1 * p.sample_rate).round() as usize..=(0.3 * p.sample_rate).round() as usize);
                let held = frames.last().map(|f| f.dir).unwrap_or_else(Vector3::z);
                for _ in 0..len {
                    if frames.len() >= n {
                        break;
                    }
                    frames.push(Frame { dir: held, blink: true, on_virtual: false });
                }
            }
            let t = time(frames.len());
            let dir = jitter(&mut rng, &(target.point() - scene.eye(t)).normalize());
            frames.push(Frame { dir, blink: false, on_virtual: target.is_virtual() });
            k += 1;
        }
        if !saccades_enabled || frames.len() >= n {
            continue;
        }

        // saccade toward the next target
        let t0 = time(frames.len());
        let eye = scene.eye(t0);
        let next = next_target(&mut rng, p, &eye, &anchor);
        let from = Unit::new_normalize(target.point() - eye);
        let to = Unit::new_normalize(next.point() - eye);
        let amplitude = from.angle(&to).to_degrees();
        let peak = (p.main_sequence_slope * amplitude).max(p.peak_velocity_floor);
        let steps = ((2.0 * amplitude / peak * p.sample_rate).round() as usize).max(1);
        for j in 1..steps {
            if frames.len() >= n {
                break;
            }
            let s = saccade_progress(j as f64 / steps as f64);
            let dir = from.slerp(&to, s).into_inner();
            frames.push(Frame { dir, blink: false, on_virtual: false });
        }
        target = next;
        if matches!(target, Target::Body(_) | Target::Visualizer(_)) {
            anchor = target.point();
        }
    }

    let pupil_noise = Normal::new(0.0, p.pupil_sd_mm).expect("finite normal");
    let mut pupil_state = 0.0;
    let samples = frames
        .into_iter()
        .enumerate()
        .map(|(i, f)| {
            let t = time(i);
            let eye = scene.eye(t);
            let rot = scene.head_rotation(t);
            let translation = eye - rot * EYE_OFFSET;
            pupil_state = 0.95 * pupil_state + 0.3122 * pupil_noise.sample(&mut rng);
            let dropout = rng.random::<f64>() < p.pupil_dropout;
            let pupil_mm = if f.blink {
                0.0
            } else if dropout {
                1.0
            } else {
                (p.pupil_mean_mm + pupil_state).max(1.5)
            };
            GazeSample {
                t,
                gaze_dir: (rot.inverse() * f.dir).normalize(),
                eye_center: EYE_OFFSET,
                pupil_mm,
                blink: f.blink,
                on_virtual: f.on_virtual,
                head_pose: Pose::new(translation, rot),
            }
        })
        .collect();

    TrialRecording {
        participant_id: participant_id.to_string(),
        incident,
        incident_time: rng.random_range(30.0..=40.0),
        sa_label: p.label,
        samples,
        pupil_baseline: PupilBaseline { mean_mm: p.pupil_mean_mm * 0.97, std_mm: p.pupil_sd_mm },
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SynthConfig {
    pub n_users: usize,
    /// Fraction of trials labeled Good.
    pub good_mix: f64,
    /// Relative per-user spread of profile parameters.
    pub user_jitter: f64,
    pub good: SynthProfile,
    pub poor: SynthProfile,
}

impl Default for SynthConfig {
    fn default() -> Self {
        Self { n_users: 30, good_mix: 0.6, user_jitter: 0.1, good: SynthProfile::good(), poor: SynthProfile::poor() }
    }
}

impl SynthConfig {
    pub fn validate(&self) -> Result<(), String> {
        if self.n_users < 5 {
            return Err(format!("n_users must be at least 5, got {}", self.n_users));
        }
        if !(0.0..=1.0).contains(&self.good_mix) {
            return Err("good_mix must lie in [0, 1]".into());
        }
        if !(0.0..1.0).contains(&self.user_jitter) {
            return Err("user_jitter must lie in [0, 1)".into());
        }
        self.good.validate()?;
        self.poor.validate()
    }
}

pub fn participant_id(index: usize, n_users: usize) -> String {
    let width = n_users.to_string().len().max(2);
    format!("P{:0width$}", index + 1)
}

/// Generate all trials of a synthetic cohort: two trials per participant,
/// with exactly `round(good_mix · 2 · n_users)` Good trials.
pub fn generate_cohort(cfg: &SynthConfig, seed: u64) -> Result<Vec<TrialRecording>, String> {
    cfg.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let n_trials = 2 * cfg.n_users;
    let n_good = (cfg.good_mix * n_trials as f64).round() as usize;
    let mut labels: Vec<SaLabel> =
        (0..n_trials).map(|i| if i < n_good { SaLabel::Good } else { SaLabel::Poor }).collect();
    labels.shuffle(&mut rng);

    let mut trials = Vec::with_capacity(n_trials);
    for user in 0..cfg.n_users {
        let traits = UserTraits::draw(&mut rng, cfg.user_jitter);
        let pid = participant_id(user, cfg.n_users);
        for (k, incident) in [Incident::Bleeding, Incident::Vomiting].into_iter().enumerate() {
            let base = match labels[2 * user + k] {
                SaLabel::Good => &cfg.good,
                SaLabel::Poor => &cfg.poor,
            };
            let profile = SynthProfile { label: labels[2 * user + k], ..base.jittered(&traits) };
            let trial_seed: u64 = rng.random();
            trials.push(generate_trial(&profile, &pid, incident, trial_seed));
        }
    }
    Ok(trials)
}

#[derive(Debug, thiserror::Error)]
pub enum SynthError {
    #[error("invalid synth config: {0}")]
    Config(String),
    #[error(transparent)]
    Io(#[from] DatasetError),
}

/// Generate a cohort and write it to `out_dir` in the trial file format.
pub fn generate_dataset(cfg: &SynthConfig, seed: u64, out_dir: &Path) -> Result<Vec<TrialRecording>, SynthError> {
    let trials = generate_cohort(cfg, seed).map_err(SynthError::Config)?;
    for t in &trials {
        save_trial(out_dir, t)?;
    }
    Ok(trials)
}
