//! Focal loss on softmax probabilities.

use ndarray::Array2;

use crate::model::softmax;

/// Lower bound applied to the true-class probability before taking its log.
pub const PROB_FLOOR: f64 = 1e-12;

/// `-alpha[y] * (1 - p_y)^gamma * ln(p_y)` with `p = softmax(logits)`.
pub fn focal_loss(logits: &[f64], label: usize, gamma: f64, alpha: &[f64]) -> f64 {
    focal_loss_grad(logits, label, gamma, alpha).0
}

/// Loss and its gradient with respect to the logits.
pub fn focal_loss_grad(logits: &[f64], label: usize, gamma: f64, alpha: &[f64]) -> (f64, Vec<f64>) {
    let p = softmax(logits);
    let pt = p[label];
    // 1 - p_t summed from the other classes keeps precision near p_t = 1
    let q: f64 = p
        .iter()
        .enumerate()
        .filter(|&(j, _)| j != label)
        .map(|(_, v)| v)
        .sum();
    let a = alpha[label];
    let log_pt = pt.max(PROB_FLOOR).ln();
    let modulator = q.powf(gamma);
    let loss = -a * modulator * log_pt;

    // dL/dz_j = a * (gamma * q^(gamma-1) * p_t * ln p_t - q^gamma) * (delta_jy - p_j)
    let focus = if gamma == 0.0 || q == 0.0 {
        0.0
    } else {
        gamma * q.powf(gamma - 1.0) * pt * log_pt
    };
    let coeff = a * (focus - modulator);
    let grad = p
        .iter()
        .enumerate()
        .map(|(j, &pj)| coeff * (if j == label { 1.0 } else { 0.0 } - pj))
        .collect();
    (loss, grad)
}

/// Mean loss over a batch and the gradient of that mean.
pub fn batch_focal_loss(logits: &Array2<f64>, labels: &[usize], gamma: f64, alpha: &[f64]) -> (f64, Array2<f64>) {
    let n = labels.len() as f64;
    let mut total = 0.0;
    let mut grad = Array2::zeros(logits.raw_dim());
    for (b, &y) in labels.iter().enumerate() {
        let row = logits.row(b).to_vec();
        let (l, g) = focal_loss_grad(&row, y, gamma, alpha);
        total += l;
        for (dst, v) in grad.row_mut(b).iter_mut().zip(g) {
            *dst = v / n;
        }
    }
    (total / n, grad)
}

/// `n / (classes * n_c)` per class; absent classes get weight 1.
pub fn inverse_frequency_alpha(labels: &[usize], classes: usize) -> Vec<f64> {
    let mut counts = vec![0usize; classes];
    for &y in labels {
        counts[y] += 1;
    }
    let n = labels.len() as f64;
    counts
        .iter()
        .map(|&c| if c == 0 { 1.0 } else { n / (classes as f64 * c as f64) })
        .collect()
}
