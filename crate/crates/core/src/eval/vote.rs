//! Clip-to-video majority voting.

use crate::error::{Error, Result};
use crate::model::{mean_weights, JointWeights};

use super::predict::ClipPrediction;

#[derive(Debug, Clone, PartialEq)]
pub struct VideoVerdict {
    pub video_id: String,
    pub voted_class: usize,
    pub mean_probs: Vec<f64>,
    pub attention: JointWeights,
    pub clip_count: usize,
}

/// Majority vote over clip classes. Ties go to the tied class with the
/// highest mean probability, then to the lowest class index.
pub fn vote_video(video_id: &str, preds: &[ClipPrediction]) -> Result<VideoVerdict> {
    let first = preds.first().ok_or_else(|| Error::EmptyVote(video_id.to_string()))?;
    let classes = first.probs.len();
    let mut counts = vec![0usize; classes];
    let mut mean_probs = vec![0.0; classes];
    for p in preds {
        if p.probs.len() != classes {
            return Err(Error::dim("vote", format!("video {video_id}: inconsistent class count")));
        }
        counts[p.class] += 1;
        for (m, v) in mean_probs.iter_mut().zip(&p.probs) {
            *m += v;
        }
    }
    for m in mean_probs.iter_mut() {
        *m /= preds.len() as f64;
    }
    let top = *counts.iter().max().expect("non-empty");
    let mut voted = None;
    for c in (0..classes).filter(|&c| counts[c] == top) {
        if voted.is_none_or(|v: usize| mean_probs[c] > mean_probs[v]) {
            voted = Some(c);
        }
    }
    let attentions: Vec<JointWeights> = preds.iter().map(|p| p.attention).collect();
    Ok(VideoVerdict {
        video_id: video_id.to_string(),
        voted_class: voted.expect("at least one class"),
        mean_probs,
        attention: mean_weights(&attentions),
        clip_count: preds.len(),
    })
}

/// Groups predictions by video (first-seen order) and votes each group.
pub fn vote_all(preds: &[ClipPrediction]) -> Result<Vec<VideoVerdict>> {
    let mut order: Vec<&str> = Vec::new();
    let mut groups: std::collections::HashMap<&str, Vec<ClipPrediction>> = Default::default();
    for p in preds {
        let g = groups.entry(p.video_id.as_str()).or_default();
        if g.is_empty() {
            order.push(&p.video_id);
        }
        g.push(p.clone());
    }
    order.into_iter().map(|v| vote_video(v, &groups[v])).collect()
}
