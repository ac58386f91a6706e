//! GNN block: locally connected layer, batch normalization, LeakyReLU, dropout.
//!
//! Batch normalization treats every (node, channel) pair as its own feature
//! and takes statistics over all rows, i.e. over the batch and frame axes.

use ndarray::{Array1, Array2, Axis, Zip};
use rand::Rng;
use rand_chacha::ChaCha8Rng;

use super::lcn::LcnParams;
use super::ops::{leaky_relu, leaky_relu_grad};
use crate::error::Result;
use crate::graph::Aggregation;

/// Forward mode. Training draws dropout masks from the supplied generator.
pub enum Mode<'r> {
    Train(&'r mut ChaCha8Rng),
    Eval,
}

impl Mode<'_> {
    pub fn reborrow(&mut self) -> Mode<'_> {
        match self {
            Mode::Train(rng) => Mode::Train(rng),
            Mode::Eval => Mode::Eval,
        }
    }

    pub fn is_train(&self) -> bool {
        matches!(self, Mode::Train(_))
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct BatchNormParams {
    /// `nodes x channels`
    pub gamma: Array2<f64>,
    pub beta: Array2<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunningStats {
    pub mean: Array2<f64>,
    pub var: Array2<f64>,
}

impl RunningStats {
    pub fn new(nodes: usize, channels: usize) -> Self {
        RunningStats {
            mean: Array2::zeros((nodes, channels)),
            var: Array2::ones((nodes, channels)),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct BlockParams {
    pub lcn: LcnParams,
    pub bn: BatchNormParams,
}

impl BlockParams {
    pub fn init<R: Rng>(agg: &Aggregation, c_in: usize, c_out: usize, rng: &mut R) -> Self {
        let nodes = agg.node_count();
        BlockParams {
            lcn: LcnParams::init(agg, c_in, c_out, rng),
            bn: BatchNormParams {
                gamma: Array2::ones((nodes, c_out)),
                beta: Array2::zeros((nodes, c_out)),
            },
        }
    }

    pub fn zeros_like(&self) -> Self {
        BlockParams {
            lcn: self.lcn.zeros_like(),
            bn: BatchNormParams {
                gamma: Array2::zeros(self.bn.gamma.raw_dim()),
                beta: Array2::zeros(self.bn.beta.raw_dim()),
            },
        }
    }
}

#[derive(Debug, Clone, Copy)]
pub struct BlockSettings {
    pub leaky_slope: f64,
    pub dropout_rate: f64,
    pub bn_eps: f64,
}

/// Intermediates needed for the backward pass (training mode only).
#[derive(Debug, Clone)]
pub struct BlockCache {
    x_hat: Vec<Array2<f64>>,
    /// Batch-norm output before the activation.
    normed: Vec<Array2<f64>>,
    inv_std: Array2<f64>,
    /// Inverted-dropout multipliers (0 or 1/(1-p)); `None` when p = 0.
    mask: Option<Vec<Array2<f64>>>,
    pub batch_mean: Array2<f64>,
    pub batch_var: Array2<f64>,
    pub rows: usize,
}

pub fn block_forward(
    x: &[Array2<f64>],
    params: &BlockParams,
    running: &RunningStats,
    agg: &Aggregation,
    settings: BlockSettings,
    mode: Mode<'_>,
    layer: &str,
) -> Result<(Vec<Array2<f64>>, Option<BlockCache>)> {
    let h = params.lcn.forward(agg, x, layer)?;
    let nodes = h.len();
    let c = params.lcn.c_out;
    let slope = settings.leaky_slope;

    match mode {
        Mode::Eval => {
            let out = h
                .into_iter()
                .enumerate()
                .map(|(i, mut hi)| {
                    for (ch, mut col) in hi.axis_iter_mut(Axis(1)).enumerate() {
                        let scale = params.bn.gamma[[i, ch]] / (running.var[[i, ch]] + settings.bn_eps).sqrt();
                        let shift = params.bn.beta[[i, ch]] - running.mean[[i, ch]] * scale;
                        col.mapv_inplace(|v| leaky_relu(v * scale + shift, slope));
                    }
                    hi
                })
                .collect();
            Ok((out, None))
        }
        Mode::Train(rng) => {
            let rows = h[0].nrows();
            let mut batch_mean = Array2::zeros((nodes, c));
            let mut batch_var = Array2::zeros((nodes, c));
            let mut inv_std = Array2::zeros((nodes, c));
            let mut x_hat = Vec::with_capacity(nodes);
            let mut normed = Vec::with_capacity(nodes);
            for (i, hi) in h.into_iter().enumerate() {
                let mean: Array1<f64> = hi.mean_axis(Axis(0)).expect("non-empty batch");
                let centered = &hi - &mean;
                let var = centered.mapv(|v| v * v).mean_axis(Axis(0)).expect("non-empty batch");
                let inv = var.mapv(|v| 1.0 / (v + settings.bn_eps).sqrt());
                let xh = &centered * &inv;
                let y = &xh * &params.bn.gamma.row(i) + params.bn.beta.row(i);
                batch_mean.row_mut(i).assign(&mean);
                batch_var.row_mut(i).assign(&var);
                inv_std.row_mut(i).assign(&inv);
                x_hat.push(xh);
                normed.push(y);
            }

            let keep = 1.0 - settings.dropout_rate;
            let mask: Option<Vec<Array2<f64>>> = (settings.dropout_rate > 0.0).then(|| {
                (0..nodes)
                    .map(|_| {
                        Array2::from_shape_simple_fn((rows, c), || {
                            if rng.random::<f64>() < keep {
                                1.0 / keep
                            } else {
                                0.0
                            }
                        })
                    })
                    .collect()
            });

            let out = normed
                .iter()
                .enumerate()
                .map(|(i, y)| {
                    let mut a = y.mapv(|v| leaky_relu(v, slope));
                    if let Some(m) = &mask {
                        a *= &m[i];
                    }
                    a
                })
                .collect();
            Ok((
                out,
                Some(BlockCache {
                    x_hat,
                    normed,
                    inv_std,
                    mask,
                    batch_mean,
                    batch_var,
                    rows,
                }),
            ))
        }
    }
}

/// Returns parameter gradients and the gradient with respect to the block input.
pub fn block_backward(
    x: &[Array2<f64>],
    params: &BlockParams,
    cache: &BlockCache,
    agg: &Aggregation,
    settings: BlockSettings,
    d_out: &[Array2<f64>],
) -> (BlockParams, Vec<Array2<f64>>) {
    let mut grads = params.zeros_like();
    let n = cache.rows as f64;
    let dh: Vec<Array2<f64>> = d_out
        .iter()
        .enumerate()
        .map(|(i, d)| {
            let mut dy = d.clone();
            if let Some(m) = &cache.mask {
                dy *= &m[i];
            }
            Zip::from(&mut dy)
                .and(&cache.normed[i])
                .for_each(|g, &y| *g *= leaky_relu_grad(y, settings.leaky_slope));

            let xh = &cache.x_hat[i];
            let dgamma = (&dy * xh).sum_axis(Axis(0));
            let dbeta = dy.sum_axis(Axis(0));
            let gamma = params.bn.gamma.row(i);
            let inv = cache.inv_std.row(i);
            // dx = gamma * inv_std * (dy - mean(dy) - x_hat * mean(dy * x_hat))
            let mut dx = dy;
            Zip::from(dx.rows_mut()).and(xh.rows()).for_each(|mut row, xrow| {
                for c in 0..row.len() {
                    row[c] = gamma[c] * inv[c] * (row[c] - dbeta[c] / n - xrow[c] * dgamma[c] / n);
                }
            });
            grads.bn.gamma.row_mut(i).assign(&dgamma);
            grads.bn.beta.row_mut(i).assign(&dbeta);
            dx
        })
        .collect();
    let (lcn_grads, dx) = params.lcn.backward(agg, x, &dh);
    grads.lcn = lcn_grads;
    (grads, dx)
}

/// Exponential moving update of the running statistics, unbiased variance.
pub fn update_running(running: &mut RunningStats, cache: &BlockCache, momentum: f64) {
    let n = cache.rows as f64;
    let unbias = if n > 1.0 { n / (n - 1.0) } else { 1.0 };
    Zip::from(&mut running.mean)
        .and(&cache.batch_mean)
        .for_each(|r, &b| *r = (1.0 - momentum) * *r + momentum * b);
    Zip::from(&mut running.var)
        .and(&cache.batch_var)
        .for_each(|r, &b| *r = (1.0 - momentum) * *r + momentum * b * unbias);
}
