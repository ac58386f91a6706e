//! Clip segmentation and the on-disk clip store.
//!
//! The text store is JSON Lines, one clip per line, with the `L x 7 x 3`
//! array flattened row-major (frame, node, channel). The optional binary
//! cache holds the same arrays as little-endian `f32` after a 16-byte
//! header: magic `SPCL`, `u16` version, `u16` nodes, `u16` channels,
//! `u16` reserved, `u32` clip length. Clips appear in store order.

use std::fs;
use std::io::{BufRead, BufReader};
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::{normalize_frame, Label, NormalizeOptions, PoseSequence, NODE_CHANNELS, NODE_COUNT};
use crate::error::{Error, Result};

pub const CACHE_MAGIC: [u8; 4] = *b"SPCL";
pub const CACHE_VERSION: u16 = 1;

/// A fixed-length run of normalized frames from one video.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Clip {
    pub video_id: String,
    pub participant_id: String,
    pub label: Label,
    pub clip_index: usize,
    pub clip_len: usize,
    /// Row-major `clip_len x 7 x 3`.
    pub data: Vec<f64>,
}

impl Clip {
    pub fn frame(&self, t: usize) -> &[f64] {
        let stride = NODE_COUNT * NODE_CHANNELS;
        &self.data[t * stride..(t + 1) * stride]
    }

    pub fn id(&self) -> String {
        format!("{}#{}", self.video_id, self.clip_index)
    }
}

/// Splits every maximal run of valid, consecutively indexed frames into
/// non-overlapping clips of `clip_len`; remainders are dropped.
pub fn segment_clips(
    seq: &PoseSequence,
    clip_len: usize,
    label: Label,
    participant_id: &str,
    opts: NormalizeOptions,
) -> Vec<Clip> {
    assert!(clip_len >= 1, "clip_len must be positive");
    let mut clips = Vec::new();
    let mut run: Vec<f64> = Vec::new();
    let mut prev_index: Option<usize> = None;

    let flush = |run: &mut Vec<f64>, clips: &mut Vec<Clip>| {
        let stride = NODE_COUNT * NODE_CHANNELS;
        for chunk in run.chunks_exact(clip_len * stride) {
            clips.push(Clip {
                video_id: seq.video_id.clone(),
                participant_id: participant_id.to_string(),
                label,
                clip_index: clips.len(),
                clip_len,
                data: chunk.to_vec(),
            });
        }
        run.clear();
    };

    for frame in &seq.frames {
        let contiguous = prev_index.is_none_or(|p| frame.frame_index == p + 1);
        prev_index = Some(frame.frame_index);
        if !contiguous {
            flush(&mut run, &mut clips);
        }
        match normalize_frame(frame, opts) {
            Some(n) => {
                run.extend(n.nodes.iter().flatten());
            }
            None => flush(&mut run, &mut clips),
        }
    }
    flush(&mut run, &mut clips);
    clips
}

pub fn write_clip_store(path: &Path, clips: &[Clip]) -> Result<()> {
    let mut out = String::new();
    for clip in clips {
        out.push_str(&serde_json::to_string(clip)?);
        out.push('\n');
    }
    crate::io::write_atomic(path, out.as_bytes())
}

pub fn read_clip_store(path: &Path) -> Result<Vec<Clip>> {
    let file = fs::File::open(path).map_err(|e| Error::io(path, e))?;
    let mut clips = Vec::new();
    for (line_no, line) in BufReader::new(file).lines().enumerate() {
        let line = line.map_err(|e| Error::io(path, e))?;
        if line.trim().is_empty() {
            continue;
        }
        let clip: Clip = serde_json::from_str(&line).map_err(|e| Error::Parse {
            context: path.display().to_string(),
            frame: line_no,
            message: e.to_string(),
        })?;
        if clip.data.len() != clip.clip_len * NODE_COUNT * NODE_CHANNELS {
            return Err(Error::Format {
                context: path.display().to_string(),
                frame: line_no,
                message: format!("clip {} has {} values", clip.id(), clip.data.len()),
            });
        }
        clips.push(clip);
    }
    Ok(clips)
}

pub fn write_clip_cache(path: &Path, clips: &[Clip]) -> Result<()> {
    let clip_len = clips.first().map_or(0, |c| c.clip_len);
    if clips.iter().any(|c| c.clip_len != clip_len) {
        return Err(Error::Validation("clip cache requires a single clip length".into()));
    }
    let mut bytes = Vec::with_capacity(16 + clips.len() * clip_len * NODE_COUNT * NODE_CHANNELS * 4);
    bytes.extend_from_slice(&CACHE_MAGIC);
    bytes.extend_from_slice(&CACHE_VERSION.to_le_bytes());
    bytes.extend_from_slice(&(NODE_COUNT as u16).to_le_bytes());
    bytes.extend_from_slice(&(NODE_CHANNELS as u16).to_le_bytes());
    bytes.extend_from_slice(&0u16.to_le_bytes());
    bytes.extend_from_slice(&(clip_len as u32).to_le_bytes());
    for clip in clips {
        for &v in &clip.data {
            bytes.extend_from_slice(&(v as f32).to_le_bytes());
        }
    }
    crate::io::write_atomic(path, &bytes)
}

/// Returns the clip length and the flattened arrays in store order.
pub fn read_clip_cache(path: &Path) -> Result<(usize, Vec<Vec<f32>>)> {
    let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
    let bad = |m: &str| Error::Validation(format!("{}: {m}", path.display()));
    if bytes.len() < 16 || bytes[..4] != CACHE_MAGIC {
        return Err(bad("not a clip cache"));
    }
    let u16_at = |i: usize| u16::from_le_bytes([bytes[i], bytes[i + 1]]);
    if u16_at(4) != CACHE_VERSION {
        return Err(bad("unsupported cache version"));
    }
    let (nodes, channels) = (u16_at(6) as usize, u16_at(8) as usize);
    let clip_len = u32::from_le_bytes([bytes[12], bytes[13], bytes[14], bytes[15]]) as usize;
    let per_clip = clip_len * nodes * channels * 4;
    let body = &bytes[16..];
    if per_clip == 0 || body.len() % per_clip != 0 {
        return Err(bad("truncated cache body"));
    }
    let clips = body
        .chunks_exact(per_clip)
        .map(|chunk| {
            chunk
                .chunks_exact(4)
                .map(|b| f32::from_le_bytes([b[0], b[1], b[2], b[3]]))
                .collect()
        })
        .collect();
    Ok((clip_len, clips))
}
