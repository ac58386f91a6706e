use crate::error::Result;
use crate::model::{attention_weights, softmax, JointWeights, Model};
use crate::pose::Clip;
use crate::train::argmax;

#[derive(Debug, Clone, PartialEq)]
pub struct ClipPrediction {
    pub clip_id: String,
    pub video_id: String,
    pub probs: Vec<f64>,
    pub class: usize,
    pub attention: JointWeights,
    pub frame_attention: Vec<JointWeights>,
}

impl ClipPrediction {
    pub fn from_logits(clip_id: &str, video_id: &str, logits: &[f64], frame_attention: Vec<JointWeights>, attention: JointWeights) -> Self {
        let probs = softmax(logits);
        ClipPrediction {
            clip_id: clip_id.to_string(),
            video_id: video_id.to_string(),
            class: argmax(&probs),
            probs,
            attention,
            frame_attention,
        }
    }
}

pub fn predict_clip(model: &Model, clip: &Clip) -> Result<ClipPrediction> {
    Ok(predict_clips(model, &[clip])?.remove(0))
}

/// Evaluation-mode predictions with per-frame attention, in input order.
pub fn predict_clips(model: &Model, clips: &[&Clip]) -> Result<Vec<ClipPrediction>> {
    let mut out = Vec::with_capacity(clips.len());
    for chunk in clips.chunks(16) {
        let data: Vec<&[f64]> = chunk.iter().map(|c| c.data.as_slice()).collect();
        let eval = model.forward_eval(&data)?;
        for ((clip, logits), act) in chunk.iter().zip(eval.logits.rows()).zip(&eval.activations) {
            let (frames, attention) = attention_weights(act);
            out.push(ClipPrediction::from_logits(&clip.id(), &clip.video_id, &logits.to_vec(), frames, attention));
        }
    }
    Ok(out)
}
