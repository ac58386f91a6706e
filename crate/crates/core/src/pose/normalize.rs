use super::{coco, NormalizedFrame, RawFrame, NODE_COUNT, NODE_SOURCES};

/// Minimum confidence an origin joint must exceed for the frame to be valid.
pub const DEFAULT_MIN_CONFIDENCE: f64 = 0.1;

#[derive(Debug, Clone, Copy)]
pub struct NormalizeOptions {
    pub min_confidence: f64,
}

impl Default for NormalizeOptions {
    fn default() -> Self {
        NormalizeOptions {
            min_confidence: DEFAULT_MIN_CONFIDENCE,
        }
    }
}

/// Centers the seven upper-body nodes on the neck/hip centroid.
///
/// Returns `None` when any of the neck or hip joints is missing or at or
/// below the confidence threshold; such frames break clip runs. Undetected
/// feature joints are passed through as `(0, 0, 0)` without centering.
pub fn normalize_frame(frame: &RawFrame, opts: NormalizeOptions) -> Option<NormalizedFrame> {
    let anchors = [coco::NECK, coco::R_HIP, coco::L_HIP].map(|i| frame.joints[i]);
    if anchors.iter().any(|k| !(k.c > opts.min_confidence)) {
        return None;
    }
    let ox = (anchors[0].x + anchors[1].x + anchors[2].x) / 3.0;
    let oy = (anchors[0].y + anchors[1].y + anchors[2].y) / 3.0;

    let mut nodes = [[0.0; 3]; NODE_COUNT];
    for (node, &src) in nodes.iter_mut().zip(NODE_SOURCES.iter()) {
        let k = frame.joints[src];
        if k.is_detected() {
            *node = [k.x - ox, k.y - oy, k.c];
        }
    }
    Some(NormalizedFrame {
        nodes,
        origin: (ox, oy),
    })
}
