//! Deterministic synthetic tremor videos.
//!
//! A fixed seated skeleton is perturbed by white noise on every joint.
//! Tremor classes add oscillations to the wrist (and half as much to the
//! elbow) of the affected arm:
//!
//! | label    | side       | frequency  | waveform                          |
//! |----------|------------|------------|-----------------------------------|
//! | PT       | one        | 4-6 Hz     | steady sinusoid                   |
//! | ET       | both       | 6-9 Hz     | steady sinusoids, independent phase |
//! | FT       | one        | 4-7 Hz     | sinusoid gated by random bursts   |
//! | DT       | one        | 3-6 Hz     | sinusoid with random-walk phase   |
//! | NoTremor | none       | -          | -                                 |

use std::f64::consts::PI;
use std::path::{Path, PathBuf};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::pose::{coco, write_keypoint_file, DatasetManifest, Keypoint, Label, ManifestRecord, PoseSequence, RawFrame, COCO_JOINTS};

/// Resting seated pose, pixel coordinates in COCO-18 order.
pub const BASELINE: [(f64, f64); COCO_JOINTS] = [
    (320.0, 100.0),
    (320.0, 150.0),
    (270.0, 155.0),
    (255.0, 230.0),
    (285.0, 290.0),
    (370.0, 155.0),
    (385.0, 230.0),
    (355.0, 290.0),
    (295.0, 300.0),
    (290.0, 380.0),
    (290.0, 460.0),
    (345.0, 300.0),
    (350.0, 380.0),
    (350.0, 460.0),
    (310.0, 92.0),
    (330.0, 92.0),
    (300.0, 98.0),
    (340.0, 98.0),
];

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Side {
    Left,
    Right,
}

impl Side {
    fn joints(self) -> (usize, usize) {
        match self {
            Side::Right => (coco::R_WRIST, coco::R_ELBOW),
            Side::Left => (coco::L_WRIST, coco::L_ELBOW),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SynthParams {
    pub label: Label,
    pub tremor_freq_hz: f64,
    pub amplitude_px: f64,
    pub affected_side: Side,
    pub fps: f64,
    pub duration_frames: usize,
    pub noise_std_px: f64,
    pub clip_len: usize,
    pub seed: u64,
}

impl SynthParams {
    /// Default parameters for `label`; frequency and side are drawn from `seed`.
    pub fn sample(label: Label, seed: u64) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0x005E_ED0F_7E3A);
        let band = match label {
            Label::ET => (6.0, 9.0),
            Label::FT => (4.0, 7.0),
            Label::DT => (3.0, 6.0),
            _ => (4.0, 6.0),
        };
        SynthParams {
            label,
            tremor_freq_hz: rng.random_range(band.0..=band.1),
            amplitude_px: 6.0,
            affected_side: if rng.random_bool(0.5) { Side::Right } else { Side::Left },
            fps: 30.0,
            duration_frames: 300,
            noise_std_px: 1.0,
            clip_len: 100,
            seed,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::Config(m));
        if !(self.fps > 0.0) || !(self.tremor_freq_hz > 0.0 && self.tremor_freq_hz < self.fps / 2.0) {
            return bad(format!(
                "tremor frequency {} Hz must lie in (0, {}) for {} fps",
                self.tremor_freq_hz,
                self.fps / 2.0,
                self.fps
            ));
        }
        if !(self.amplitude_px >= 0.0) || !(self.noise_std_px >= 0.0) {
            return bad("amplitude and noise must be non-negative".into());
        }
        if self.clip_len == 0 || self.duration_frames < self.clip_len {
            return bad(format!(
                "duration {} frames is shorter than the clip length {}",
                self.duration_frames, self.clip_len
            ));
        }
        if self.label == Label::Other {
            return bad("cannot synthesize label Other".into());
        }
        Ok(())
    }
}

/// Per-frame displacement multiplier for one oscillating arm.
struct Oscillator {
    phase: f64,
    step: f64,
    jitter: f64,
    burst_on: bool,
    burst_left: usize,
    bursty: bool,
}

impl Oscillator {
    fn new(p: &SynthParams, rng: &mut ChaCha8Rng) -> Self {
        Oscillator {
            phase: rng.random_range(0.0..2.0 * PI),
            step: 2.0 * PI * p.tremor_freq_hz / p.fps,
            jitter: if p.label == Label::DT { 0.35 } else { 0.0 },
            burst_on: true,
            burst_left: 0,
            bursty: p.label == Label::FT,
        }
    }

    fn next(&mut self, fps: f64, rng: &mut ChaCha8Rng) -> (f64, f64) {
        if self.bursty && self.burst_left == 0 {
            self.burst_on = !self.burst_on;
            self.burst_left = (rng.random_range(0.5..1.5) * fps) as usize;
        }
        self.burst_left = self.burst_left.saturating_sub(1);
        let gate = if self.burst_on { 1.0 } else { 0.0 };
        let out = (gate * self.phase.sin(), gate * 0.5 * (self.phase + PI / 3.0).sin());
        self.phase += self.step;
        if self.jitter > 0.0 {
            self.phase += rng.random_range(-self.jitter..self.jitter);
        }
        out
    }
}

/// Generates one video; the manifest row points at `keypoints/<video_id>.json`.
pub fn generate_video(params: &SynthParams, video_id: &str, participant_id: &str) -> Result<(PoseSequence, ManifestRecord)> {
    params.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(params.seed);
    let noise = Normal::new(0.0, params.noise_std_px).map_err(|e| Error::Config(e.to_string()))?;

    let sides: Vec<Side> = match params.label {
        Label::NoTremor | Label::Other => vec![],
        Label::ET => vec![Side::Right, Side::Left],
        _ => vec![params.affected_side],
    };
    let mut arms: Vec<(Side, Oscillator)> = sides
        .into_iter()
        .map(|s| (s, Oscillator::new(params, &mut rng)))
        .collect();

    let mut frames = Vec::with_capacity(params.duration_frames);
    for t in 0..params.duration_frames {
        let mut joints = [Keypoint::UNDETECTED; COCO_JOINTS];
        for (j, k) in joints.iter_mut().enumerate() {
            let (bx, by) = BASELINE[j];
            *k = Keypoint::new(
                bx + noise.sample(&mut rng),
                by + noise.sample(&mut rng),
                rng.random_range(0.7..=1.0),
            );
        }
        for (side, osc) in arms.iter_mut() {
            let (dx, dy) = osc.next(params.fps, &mut rng);
            let (wrist, elbow) = side.joints();
            joints[wrist].x += params.amplitude_px * dx;
            joints[wrist].y += params.amplitude_px * dy;
            joints[elbow].x += 0.5 * params.amplitude_px * dx;
            joints[elbow].y += 0.5 * params.amplitude_px * dy;
        }
        frames.push(RawFrame { frame_index: t, joints });
    }

    let seq = PoseSequence {
        video_id: video_id.to_string(),
        fps: Some(params.fps),
        frames,
    };
    let record = ManifestRecord {
        video_id: video_id.to_string(),
        participant_id: participant_id.to_string(),
        label: params.label,
        task_id: "rest".into(),
        path: PathBuf::from("keypoints").join(format!("{video_id}.json")),
    };
    Ok((seq, record))
}

/// Options for a whole synthetic dataset.
#[derive(Debug, Clone)]
pub struct SynthDataset {
    pub classes: Vec<Label>,
    pub videos_per_class: usize,
    pub seed: u64,
    pub duration_frames: usize,
    pub clip_len: usize,
    pub amplitude_px: f64,
    pub noise_std_px: f64,
}

impl SynthDataset {
    pub fn new(classes: Vec<Label>, videos_per_class: usize, seed: u64) -> Self {
        SynthDataset {
            classes,
            videos_per_class,
            seed,
            duration_frames: 300,
            clip_len: 100,
            amplitude_px: 6.0,
            noise_std_px: 1.0,
        }
    }

    /// Parameters for every video, class-major.
    pub fn video_params(&self) -> Vec<(String, SynthParams)> {
        let mut out = Vec::new();
        for (ci, &label) in self.classes.iter().enumerate() {
            for i in 0..self.videos_per_class {
                let seed = crate::train::derive_seed(self.seed, ci * 100_003 + i, 7);
                let mut p = SynthParams::sample(label, seed);
                p.duration_frames = self.duration_frames;
                p.clip_len = self.clip_len;
                p.amplitude_px = self.amplitude_px;
                p.noise_std_px = self.noise_std_px;
                out.push((format!("{label}_{i:03}"), p));
            }
        }
        out
    }

    pub fn generate(&self) -> Result<Vec<(PoseSequence, ManifestRecord, SynthParams)>> {
        self.video_params()
            .into_par_iter()
            .map(|(id, p)| {
                let (seq, rec) = generate_video(&p, &id, &format!("P{id}"))?;
                Ok((seq, rec, p))
            })
            .collect()
    }

    /// Writes `manifest.csv` and `keypoints/*.json` under `out`.
    pub fn write(&self, out: &Path) -> Result<DatasetManifest> {
        let videos = self.generate()?;
        videos
            .par_iter()
            .map(|(seq, rec, _)| write_keypoint_file(&out.join(&rec.path), seq))
            .collect::<Result<Vec<()>>>()?;
        let mut manifest = DatasetManifest::new(videos.into_iter().map(|(_, r, _)| r).collect())?;
        manifest.write(&out.join("manifest.csv"))?;
        manifest.base_dir = out.to_path_buf();
        Ok(manifest)
    }
}
