//! Pyramidal channel squeezing and fusion.
//!
//! For each target node `m`, every node `k` is average-pooled down to the
//! schedule width for `(m, k)`. The long-range pieces are concatenated
//! first, then appended after the self and short-range pieces; the fused
//! vector is projected by the per-target matrix `W^m`. Squeezing and fusion
//! have no parameters; only `W^m` is learned. There is no activation.

use std::collections::HashMap;

use ndarray::linalg::general_mat_mul;
use ndarray::{s, Array2};
use rand::Rng;

use super::ops::{squeeze_rows, squeeze_rows_backward};
use crate::error::{Error, Result};
use crate::graph::SqueezeSchedule;

#[derive(Debug, Clone, PartialEq)]
pub struct PcsfParams {
    /// `wm[m]` has shape `fused_width(m) x out_channels`.
    pub wm: Vec<Array2<f64>>,
}

impl PcsfParams {
    pub fn zeros(schedule: &SqueezeSchedule, out_channels: usize) -> Self {
        PcsfParams {
            wm: (0..schedule.widths.len())
                .map(|m| Array2::zeros((schedule.fused_width(m), out_channels)))
                .collect(),
        }
    }

    pub fn init<R: Rng>(schedule: &SqueezeSchedule, out_channels: usize, rng: &mut R) -> Self {
        let mut p = Self::zeros(schedule, out_channels);
        for w in p.wm.iter_mut() {
            let bound = 1.0 / (w.nrows() as f64).sqrt();
            w.mapv_inplace(|_| rng.random_range(-bound..bound));
        }
        p
    }

    pub fn zeros_like(&self) -> Self {
        PcsfParams {
            wm: self.wm.iter().map(|w| Array2::zeros(w.raw_dim())).collect(),
        }
    }

    pub fn out_channels(&self) -> usize {
        self.wm.first().map_or(0, |w| w.ncols())
    }
}

/// Builds the fused `rows x fused_width(m)` matrix for every target node.
fn fuse_all(h: &[Array2<f64>], schedule: &SqueezeSchedule, params: &PcsfParams) -> Result<Vec<Array2<f64>>> {
    if h.len() != schedule.widths.len() {
        return Err(Error::dim("pcsf", format!("expected {} nodes, got {}", schedule.widths.len(), h.len())));
    }
    if let Some(hk) = h.iter().find(|hk| hk.ncols() != schedule.c_in) {
        return Err(Error::dim(
            "pcsf",
            format!("input has {} channels, schedule expects {}", hk.ncols(), schedule.c_in),
        ));
    }
    let rows = h[0].nrows();
    let mut squeezed: HashMap<(usize, usize), Array2<f64>> = HashMap::new();
    let mut fused = Vec::with_capacity(h.len());
    for m in 0..h.len() {
        let width = schedule.fused_width(m);
        if params.wm[m].nrows() != width {
            return Err(Error::dim(
                format!("pcsf.Wm.{}", m + 1),
                format!("fused length {width} but W^m has {} rows", params.wm[m].nrows()),
            ));
        }
        let mut f = Array2::zeros((rows, width));
        for (k, w, off) in schedule.segments(m) {
            if !squeezed.contains_key(&(k, w)) {
                squeezed.insert((k, w), squeeze_rows(h[k].view(), w)?);
            }
            f.slice_mut(s![.., off..off + w]).assign(&squeezed[&(k, w)]);
        }
        fused.push(f);
    }
    Ok(fused)
}

/// Scatters fused-vector gradients back onto node features.
fn unfuse(d_fused: &[Array2<f64>], schedule: &SqueezeSchedule, rows: usize) -> Vec<Array2<f64>> {
    let mut dh: Vec<Array2<f64>> = (0..d_fused.len())
        .map(|_| Array2::zeros((rows, schedule.c_in)))
        .collect();
    for (m, df) in d_fused.iter().enumerate() {
        for (k, w, off) in schedule.segments(m) {
            let seg = df.slice(s![.., off..off + w]);
            dh[k] += &squeeze_rows_backward(seg, schedule.c_in);
        }
    }
    dh
}

/// Per-row forward: `out[m] = fused_m W^m`.
pub fn pcsf_forward(
    h: &[Array2<f64>],
    params: &PcsfParams,
    schedule: &SqueezeSchedule,
) -> Result<Vec<Array2<f64>>> {
    Ok(fuse_all(h, schedule, params)?
        .iter()
        .zip(&params.wm)
        .map(|(f, w)| f.dot(w))
        .collect())
}

pub fn pcsf_backward(
    h: &[Array2<f64>],
    params: &PcsfParams,
    schedule: &SqueezeSchedule,
    d_out: &[Array2<f64>],
) -> Result<(PcsfParams, Vec<Array2<f64>>)> {
    let fused = fuse_all(h, schedule, params)?;
    let mut grads = params.zeros_like();
    let mut d_fused = Vec::with_capacity(fused.len());
    for m in 0..fused.len() {
        general_mat_mul(1.0, &fused[m].t(), &d_out[m], 0.0, &mut grads.wm[m]);
        d_fused.push(d_out[m].dot(&params.wm[m].t()));
    }
    Ok((grads, unfuse(&d_fused, schedule, h[0].nrows())))
}

/// Node-averaged output: `(1/nodes) sum_m fused_m W^m`, one row per input row.
///
/// Squeezing, fusion and projection are linear, so applying this to
/// frame-averaged features equals averaging the per-frame outputs.
pub fn pcsf_node_mean(
    h: &[Array2<f64>],
    params: &PcsfParams,
    schedule: &SqueezeSchedule,
) -> Result<Array2<f64>> {
    let fused = fuse_all(h, schedule, params)?;
    let nodes = fused.len() as f64;
    let mut out = Array2::zeros((h[0].nrows(), params.out_channels()));
    for (f, w) in fused.iter().zip(&params.wm) {
        general_mat_mul(1.0 / nodes, f, w, 1.0, &mut out);
    }
    Ok(out)
}

pub fn pcsf_node_mean_backward(
    h: &[Array2<f64>],
    params: &PcsfParams,
    schedule: &SqueezeSchedule,
    d_out: &Array2<f64>,
) -> Result<(PcsfParams, Vec<Array2<f64>>)> {
    let scaled = d_out / h.len() as f64;
    let d_each: Vec<Array2<f64>> = (0..h.len()).map(|_| scaled.clone()).collect();
    pcsf_backward(h, params, schedule, &d_each)
}
