//! Keypoint ingestion: detector output parsing, upper-body normalization,
//! clip segmentation and the dataset manifest.
//!
//! Raw frames use the 18-joint COCO layout emitted by the pose detector.
//! Only seven upper-body joints are kept, re-indexed along the arm chain
//! from the right wrist to the left wrist through the neck, so that index
//! distance equals skeletal path distance.

mod clips;
mod keypoints;
mod manifest;
mod normalize;

pub use clips::{
    read_clip_cache, read_clip_store, segment_clips, write_clip_cache, write_clip_store, Clip,
    CACHE_MAGIC, CACHE_VERSION,
};
pub use keypoints::{parse_keypoint_file, parse_keypoint_path, write_keypoint_file, KeypointDocument};
pub use manifest::{
    filter_manifest, ingest_manifest, DatasetManifest, FilterRules, FilteredRecord, Label,
    ManifestRecord, TaskMode,
};
pub use normalize::{normalize_frame, NormalizeOptions, DEFAULT_MIN_CONFIDENCE};

/// Number of joints in a raw detector frame.
pub const COCO_JOINTS: usize = 18;
/// Number of joints retained for classification.
pub const NODE_COUNT: usize = 7;
/// Channels per retained joint: x', y', c.
pub const NODE_CHANNELS: usize = 3;

/// COCO-18 indices.
pub mod coco {
    pub const NOSE: usize = 0;
    pub const NECK: usize = 1;
    pub const R_SHOULDER: usize = 2;
    pub const R_ELBOW: usize = 3;
    pub const R_WRIST: usize = 4;
    pub const L_SHOULDER: usize = 5;
    pub const L_ELBOW: usize = 6;
    pub const L_WRIST: usize = 7;
    pub const R_HIP: usize = 8;
    pub const R_KNEE: usize = 9;
    pub const R_ANKLE: usize = 10;
    pub const L_HIP: usize = 11;
    pub const L_KNEE: usize = 12;
    pub const L_ANKLE: usize = 13;
    pub const R_EYE: usize = 14;
    pub const L_EYE: usize = 15;
    pub const R_EAR: usize = 16;
    pub const L_EAR: usize = 17;
}

/// COCO index of each retained node, in node order (0-based node ids).
pub const NODE_SOURCES: [usize; NODE_COUNT] = [
    coco::R_WRIST,
    coco::R_ELBOW,
    coco::R_SHOULDER,
    coco::NECK,
    coco::L_SHOULDER,
    coco::L_ELBOW,
    coco::L_WRIST,
];

/// Display names of the retained nodes (node 1..7).
pub const NODE_NAMES: [&str; NODE_COUNT] = [
    "RWrist",
    "RElbow",
    "RShoulder",
    "Neck",
    "LShoulder",
    "LElbow",
    "LWrist",
];

/// A single detected joint. `(0, 0, 0)` marks an undetected joint.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct Keypoint {
    pub x: f64,
    pub y: f64,
    pub c: f64,
}

impl Keypoint {
    pub const UNDETECTED: Keypoint = Keypoint {
        x: 0.0,
        y: 0.0,
        c: 0.0,
    };

    pub fn new(x: f64, y: f64, c: f64) -> Self {
        Keypoint { x, y, c }
    }

    pub fn is_detected(&self) -> bool {
        self.c > 0.0
    }
}

/// One detector frame in COCO-18 layout.
#[derive(Debug, Clone, PartialEq)]
pub struct RawFrame {
    pub frame_index: usize,
    pub joints: [Keypoint; COCO_JOINTS],
}

impl RawFrame {
    pub fn undetected(frame_index: usize) -> Self {
        RawFrame {
            frame_index,
            joints: [Keypoint::UNDETECTED; COCO_JOINTS],
        }
    }

    /// Builds a frame from a flat `[x0, y0, c0, x1, ...]` list.
    pub fn from_flat(frame_index: usize, values: &[f64]) -> Option<Self> {
        if values.len() != COCO_JOINTS * 3 {
            return None;
        }
        let mut joints = [Keypoint::UNDETECTED; COCO_JOINTS];
        for (joint, xyc) in joints.iter_mut().zip(values.chunks_exact(3)) {
            *joint = Keypoint::new(xyc[0], xyc[1], xyc[2]);
        }
        Some(RawFrame {
            frame_index,
            joints,
        })
    }

    pub fn to_flat(&self) -> Vec<f64> {
        self.joints.iter().flat_map(|k| [k.x, k.y, k.c]).collect()
    }

    /// Applies the same offset to every detected joint.
    pub fn translated(&self, dx: f64, dy: f64) -> Self {
        let mut out = self.clone();
        for joint in out.joints.iter_mut().filter(|j| j.is_detected()) {
            joint.x += dx;
            joint.y += dy;
        }
        out
    }
}

/// Per-video keypoint time series, frames sorted by index.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct PoseSequence {
    pub video_id: String,
    pub fps: Option<f64>,
    pub frames: Vec<RawFrame>,
}

impl PoseSequence {
    pub fn len(&self) -> usize {
        self.frames.len()
    }

    pub fn is_empty(&self) -> bool {
        self.frames.is_empty()
    }
}

/// A frame reduced to the seven retained nodes, relative to the body origin.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NormalizedFrame {
    /// `(x', y', c)` per node, node order RWrist..LWrist.
    pub nodes: [[f64; NODE_CHANNELS]; NODE_COUNT],
    /// Centroid of neck and both hips that was subtracted.
    pub origin: (f64, f64),
}
