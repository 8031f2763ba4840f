//! Random constant-head-speed gaze streams and a brute-force
//! single-threshold I-VT used as a reference.

use nalgebra::{Rotation3, Unit, Vector3};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use sagaze_core::events::{classify_events, ClassifierConfig, EventKind};
use sagaze_core::trial::{GazeSample, Pose};

pub struct Stream {
    pub samples: Vec<GazeSample>,
}

/// Random stream at constant head speed (cm/s). Per-step angular speeds
/// stay at least 5 deg/s away from both velocity thresholds so that the
/// expected phase of every sample is unambiguous.
pub fn stream(seed: u64, head_cm_s: f64) -> Stream {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let n = rng.random_range(40..400);
    let mut t = 0.0;
    let mut dir = Vector3::new(rng.random_range(-1.0..1.0), 1.0, rng.random_range(-1.0..0.0)).normalize();
    let mut eye = Vector3::new(0.4, -0.4, 0.6);
    let mut samples = Vec::with_capacity(n);
    let mut segment_left = 0usize;
    let mut speed_band = 0usize;
    let mut blink = false;
    for _ in 0..n {
        if segment_left == 0 {
            segment_left = rng.random_range(1..25);
            speed_band = rng.random_range(0..3);
            blink = rng.random::<f64>() < 0.1;
        }
        segment_left -= 1;
        samples.push(GazeSample {
            t,
            gaze_dir: dir,
            eye_center: eye,
            pupil_mm: if blink { 0.0 } else { 4.0 },
            blink,
            on_virtual: rng.random::<f64>() < 0.3,
            head_pose: Pose::identity(),
        });
        let dt = 1.0 / 60.0 + rng.random_range(-0.001..0.001);
        let deg_s: f64 = match speed_band {
            0 => rng.random_range(0.0..25.0),
            1 => rng.random_range(35.0..95.0),
            _ => rng.random_range(105.0..400.0),
        };
        let other = Vector3::new(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0));
        let axis = Unit::new_normalize(dir.cross(&other));
        dir = (Rotation3::from_axis_angle(&axis, (deg_s * dt).to_radians()) * dir).normalize();
        eye += Vector3::x() * (head_cm_s / 100.0 * dt);
        t += dt;
    }
    Stream { samples }
}

#[derive(Debug, Clone, Copy, PartialEq)]
enum Label {
    Slow,
    Fast,
    Blink,
}

/// Plain single-threshold I-VT: label samples, split into maximal runs,
/// relabel too-short slow runs, re-split.
pub fn oracle(samples: &[GazeSample], threshold: f64, min_fix: f64) -> Vec<(EventKind, usize, usize, f64, f64)> {
    let n = samples.len();
    let speed = |i: usize| {
        let (a, b) = if i + 1 < n { (i, i + 1) } else { (n - 2, n - 1) };
        let c = samples[a].gaze_dir.dot(&samples[b].gaze_dir).clamp(-1.0, 1.0);
        c.acos().to_degrees() / (samples[b].t - samples[a].t)
    };
    let mut labels: Vec<Label> = (0..n)
        .map(|i| {
            if samples[i].blink {
                Label::Blink
            } else if speed(i) < threshold {
                Label::Slow
            } else {
                Label::Fast
            }
        })
        .collect();

    let split = |labels: &[Label]| {
        let mut runs = Vec::new();
        let mut start = 0;
        for i in 1..=n {
            if i == n || labels[i] != labels[start] {
                runs.push((labels[start], start, i - 1));
                start = i;
            }
        }
        runs
    };
    let span = |runs: &[(Label, usize, usize)], k: usize| {
        let (_, a, b) = runs[k];
        let end = if k + 1 < runs.len() { samples[runs[k + 1].1].t } else { samples[b].t };
        let end = if end > samples[a].t { end } else { samples[a].t + 1.0 / 60.0 };
        (samples[a].t, end)
    };

    let runs = split(&labels);
    for k in 0..runs.len() {
        let (s, e) = span(&runs, k);
        if runs[k].0 == Label::Slow && e - s < min_fix - 1e-9 {
            for l in &mut labels[runs[k].1..=runs[k].2] {
                *l = Label::Fast;
            }
        }
    }
    let runs = split(&labels);
    (0..runs.len())
        .map(|k| {
            let kind = match runs[k].0 {
                Label::Slow => EventKind::Fixation,
                Label::Fast => EventKind::Saccade,
                Label::Blink => EventKind::Blink,
            };
            let (s, e) = span(&runs, k);
            (kind, runs[k].1, runs[k].2, s, e)
        })
        .collect()
}

pub fn check(seed: u64, head_cm_s: f64, threshold: f64) -> [usize; 3] {
    let cfg = ClassifierConfig::default();
    let s = stream(seed, head_cm_s);
    let got = classify_events(&s.samples, &cfg).unwrap();
    let want = oracle(&s.samples, threshold, cfg.min_fixation_duration);
    let got: Vec<_> = got.iter().map(|e| (e.kind, e.first_sample, e.last_sample, e.t_start, e.t_end)).collect();
    assert_eq!(got, want, "seed {seed}, head speed {head_cm_s}");
    let count = |k| got.iter().filter(|e| e.0 == k).count();
    [count(EventKind::Fixation), count(EventKind::Saccade), count(EventKind::Blink)]
}

/// Streams 0..50 at rest and 1000..1050 moving; returns per-kind totals.
pub fn hundred_streams() -> [usize; 3] {
    let mut totals = [0usize; 3];
    for seed in 0..50 {
        for c in [check(seed, 0.0, 30.0), check(1000 + seed, 20.0, 100.0)] {
            totals.iter_mut().zip(c).for_each(|(t, x)| *t += x);
        }
    }
    totals
}
