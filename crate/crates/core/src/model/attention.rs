use ndarray::Array2;

use crate::pose::NODE_COUNT;

pub type JointWeights = [f64; NODE_COUNT];

/// Normalizes non-negative node scores to sum to one; an all-zero row
/// becomes uniform.
pub fn normalize_weights(scores: &[f64]) -> JointWeights {
    let mut out = [1.0 / NODE_COUNT as f64; NODE_COUNT];
    let total: f64 = scores.iter().sum();
    if total > 0.0 {
        for (o, s) in out.iter_mut().zip(scores) {
            *o = s / total;
        }
    }
    out
}

/// Per-frame joint weights and their clip-level aggregate (frame mean, renormalized).
pub fn attention_weights(activations: &Array2<f64>) -> (Vec<JointWeights>, JointWeights) {
    let frames: Vec<JointWeights> = activations
        .rows()
        .into_iter()
        .map(|row| normalize_weights(&row.to_vec()))
        .collect();
    (frames.clone(), mean_weights(&frames))
}

/// Mean of several weight vectors, renormalized.
pub fn mean_weights(vectors: &[JointWeights]) -> JointWeights {
    let mut acc = [0.0; NODE_COUNT];
    for v in vectors {
        for (a, x) in acc.iter_mut().zip(v) {
            *a += x;
        }
    }
    normalize_weights(&acc)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn uniform_activations() {
        let (frames, clip) = attention_weights(&Array2::from_elem((4, 7), 2.5));
        for w in frames.iter().chain(std::iter::once(&clip)) {
            assert!(w.iter().all(|&v| (v - 1.0 / 7.0).abs() < 1e-12));
        }
        assert!((clip[0] - 0.1429).abs() < 1e-4);
    }

    #[test]
    fn single_joint() {
        let mut a = Array2::zeros((3, 7));
        a.column_mut(2).fill(4.0);
        let (_, clip) = attention_weights(&a);
        assert_eq!(clip, [0.0, 0.0, 1.0, 0.0, 0.0, 0.0, 0.0]);
    }

    #[test]
    fn all_zero_frame_falls_back_to_uniform() {
        let mut a = Array2::zeros((2, 7));
        a[[1, 0]] = 1.0;
        let (frames, clip) = attention_weights(&a);
        assert_eq!(frames[0], [1.0 / 7.0; 7]);
        assert!((clip.iter().sum::<f64>() - 1.0).abs() < 1e-12);
        assert!((clip[0] - (1.0 / 7.0 + 1.0) / 2.0).abs() < 1e-12);
    }
}
