//! Keypoint file formats.
//!
//! Two layouts are accepted:
//!
//! * a single JSON document per video:
//!   `{"format": "spapnet-keypoints", "version": 1, "video_id": "...", "fps": 30,
//!     "frames": [{"frame_index": 0, "keypoints": [x0, y0, c0, ..., x17, y17, c17]}, ...]}`
//! * a directory holding one detector-native document per frame, e.g.
//!   `clip_000000000012_keypoints.json` containing
//!   `{"people": [{"pose_keypoints_2d": [...54 numbers...]}]}`. The frame index
//!   is the last run of digits in the file stem. A frame with no people is
//!   recorded as fully undetected; with several people the one with the
//!   largest summed confidence is kept.

use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};
use serde_json::Value;

use super::{PoseSequence, RawFrame, COCO_JOINTS};
use crate::error::{Error, Result};

pub const DOCUMENT_FORMAT: &str = "spapnet-keypoints";
pub const DOCUMENT_VERSION: u32 = 1;

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct KeypointDocument {
    pub format: String,
    pub version: u32,
    #[serde(default)]
    pub video_id: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub fps: Option<f64>,
    pub frames: Vec<FrameRecord>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct FrameRecord {
    pub frame_index: usize,
    pub keypoints: Vec<f64>,
}

/// Reads either a per-video document or a per-frame directory.
pub fn parse_keypoint_path(path: &Path) -> Result<PoseSequence> {
    if path.is_dir() {
        parse_frame_directory(path)
    } else {
        parse_keypoint_file(path)
    }
}

/// Reads a per-video keypoint document.
pub fn parse_keypoint_file(path: &Path) -> Result<PoseSequence> {
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let context = path.display().to_string();
    let mut seq = parse_document(&text, &context)?;
    if seq.video_id.is_empty() {
        seq.video_id = file_stem(path);
    }
    Ok(seq)
}

fn file_stem(path: &Path) -> String {
    path.file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_default()
}

pub(crate) fn parse_document(text: &str, context: &str) -> Result<PoseSequence> {
    let root: Value = serde_json::from_str(text).map_err(|e| Error::Parse {
        context: context.to_string(),
        frame: 0,
        message: e.to_string(),
    })?;
    let frames = root
        .get("frames")
        .and_then(Value::as_array)
        .ok_or_else(|| Error::Parse {
            context: context.to_string(),
            frame: 0,
            message: "missing top-level \"frames\" array".into(),
        })?;

    let mut out = Vec::with_capacity(frames.len());
    for (pos, record) in frames.iter().enumerate() {
        let parse_err = |frame: usize, message: String| Error::Parse {
            context: context.to_string(),
            frame,
            message,
        };
        let frame_index = match record.get("frame_index") {
            Some(v) => v
                .as_u64()
                .ok_or_else(|| parse_err(pos, format!("frame_index is not a non-negative integer: {v}")))?
                as usize,
            None => return Err(parse_err(pos, "missing frame_index".into())),
        };
        let values = record
            .get("keypoints")
            .and_then(Value::as_array)
            .ok_or_else(|| parse_err(frame_index, "missing keypoints array".into()))?;
        let flat = numbers(values).map_err(|m| parse_err(frame_index, m))?;
        out.push(frame_from_flat(frame_index, &flat, context)?);
    }

    let fps = root.get("fps").and_then(Value::as_f64);
    let video_id = root
        .get("video_id")
        .and_then(Value::as_str)
        .unwrap_or_default()
        .to_string();
    let frames = sort_frames(out, context)?;
    Ok(PoseSequence {
        video_id,
        fps,
        frames,
    })
}

fn numbers(values: &[Value]) -> std::result::Result<Vec<f64>, String> {
    values
        .iter()
        .enumerate()
        .map(|(i, v)| {
            v.as_f64()
                .ok_or_else(|| format!("keypoint value {i} is not a number: {v}"))
        })
        .collect()
}

fn frame_from_flat(frame_index: usize, flat: &[f64], context: &str) -> Result<RawFrame> {
    RawFrame::from_flat(frame_index, flat).ok_or_else(|| Error::Format {
        context: context.to_string(),
        frame: frame_index,
        message: format!(
            "expected {} joints ({} values), found {} values",
            COCO_JOINTS,
            COCO_JOINTS * 3,
            flat.len()
        ),
    })
}

fn sort_frames(mut frames: Vec<RawFrame>, context: &str) -> Result<Vec<RawFrame>> {
    frames.sort_by_key(|f| f.frame_index);
    if let Some(w) = frames.windows(2).find(|w| w[0].frame_index == w[1].frame_index) {
        return Err(Error::Format {
            context: context.to_string(),
            frame: w[1].frame_index,
            message: "duplicate frame_index".into(),
        });
    }
    Ok(frames)
}

fn trailing_index(stem: &str) -> Option<usize> {
    let stem = stem.strip_suffix("_keypoints").unwrap_or(stem);
    let end = stem.rfind(|c: char| c.is_ascii_digit())? + 1;
    let start = stem[..end]
        .rfind(|c: char| !c.is_ascii_digit())
        .map_or(0, |i| i + 1);
    stem[start..end].parse().ok()
}

fn parse_frame_directory(dir: &Path) -> Result<PoseSequence> {
    let mut paths: Vec<_> = fs::read_dir(dir)
        .map_err(|e| Error::io(dir, e))?
        .filter_map(|entry| entry.ok().map(|e| e.path()))
        .filter(|p| p.extension().is_some_and(|e| e == "json"))
        .collect();
    paths.sort();

    let mut frames = Vec::with_capacity(paths.len());
    for (pos, path) in paths.iter().enumerate() {
        let context = path.display().to_string();
        let frame_index = trailing_index(&file_stem(path)).unwrap_or(pos);
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let root: Value = serde_json::from_str(&text).map_err(|e| Error::Parse {
            context: context.clone(),
            frame: frame_index,
            message: e.to_string(),
        })?;
        let people = root
            .get("people")
            .and_then(Value::as_array)
            .ok_or_else(|| Error::Parse {
                context: context.clone(),
                frame: frame_index,
                message: "missing \"people\" array".into(),
            })?;

        let mut best: Option<(f64, RawFrame)> = None;
        for person in people {
            let values = person
                .get("pose_keypoints_2d")
                .and_then(Value::as_array)
                .ok_or_else(|| Error::Parse {
                    context: context.clone(),
                    frame: frame_index,
                    message: "person without pose_keypoints_2d".into(),
                })?;
            let flat = numbers(values).map_err(|message| Error::Parse {
                context: context.clone(),
                frame: frame_index,
                message,
            })?;
            let frame = frame_from_flat(frame_index, &flat, &context)?;
            let score: f64 = frame.joints.iter().map(|j| j.c).sum();
            if best.as_ref().is_none_or(|(s, _)| score > *s) {
                best = Some((score, frame));
            }
        }
        frames.push(best.map_or_else(|| RawFrame::undetected(frame_index), |(_, f)| f));
    }

    let context = dir.display().to_string();
    Ok(PoseSequence {
        video_id: file_stem(dir),
        fps: None,
        frames: sort_frames(frames, &context)?,
    })
}

/// Serializes a sequence as a per-video document.
pub fn write_keypoint_file(path: &Path, seq: &PoseSequence) -> Result<()> {
    let doc = KeypointDocument {
        format: DOCUMENT_FORMAT.into(),
        version: DOCUMENT_VERSION,
        video_id: seq.video_id.clone(),
        fps: seq.fps,
        frames: seq
            .frames
            .iter()
            .map(|f| FrameRecord {
                frame_index: f.frame_index,
                keypoints: f.to_flat(),
            })
            .collect(),
    };
    let text = serde_json::to_string(&doc)?;
    crate::io::write_atomic(path, text.as_bytes())
}
