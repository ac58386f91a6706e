use ndarray::{Array1, Array2};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::block::{BlockParams, BlockSettings};
use super::pcsf::PcsfParams;
use crate::error::{Error, Result};
use crate::graph::{Aggregation, SqueezeRatios, SqueezeSchedule};
use crate::pose::NODE_CHANNELS;

/// Network hyperparameters.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelConfig {
    pub input_channels: usize,
    pub block_channels: Vec<usize>,
    pub leaky_slope: f64,
    pub dropout_rate: f64,
    pub pcsf_out_channels: usize,
    pub num_classes: usize,
    pub b: f64,
    pub d: f64,
    pub clip_len: usize,
    /// When false the confidence channel is zeroed at the input.
    pub use_confidence: bool,
    pub bn_eps: f64,
    pub bn_momentum: f64,
}

impl Default for ModelConfig {
    fn default() -> Self {
        ModelConfig {
            input_channels: NODE_CHANNELS,
            block_channels: vec![64, 128],
            leaky_slope: 0.2,
            dropout_rate: 0.2,
            pcsf_out_channels: 128,
            num_classes: 2,
            b: 0.9,
            d: 0.125,
            clip_len: 100,
            use_confidence: true,
            bn_eps: 1e-5,
            bn_momentum: 0.1,
        }
    }
}

impl ModelConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::Config(m));
        if self.input_channels != NODE_CHANNELS {
            return bad(format!("input_channels must be {NODE_CHANNELS}"));
        }
        if self.block_channels.is_empty() || self.block_channels.contains(&0) {
            return bad("block_channels must be a non-empty list of positive widths".into());
        }
        if self.pcsf_out_channels == 0 || self.num_classes < 2 || self.clip_len == 0 {
            return bad("pcsf_out_channels, clip_len must be positive and num_classes >= 2".into());
        }
        for (name, v) in [
            ("leaky_slope", self.leaky_slope),
            ("dropout_rate", self.dropout_rate),
            ("bn_momentum", self.bn_momentum),
        ] {
            if !(0.0..=1.0).contains(&v) {
                return bad(format!("{name}={v} outside [0, 1]"));
            }
        }
        if self.dropout_rate >= 1.0 {
            return bad("dropout_rate must be below 1".into());
        }
        if !(self.bn_eps > 0.0) {
            return bad("bn_eps must be positive".into());
        }
        self.ratios().validate()
    }

    pub fn ratios(&self) -> SqueezeRatios {
        SqueezeRatios {
            b: self.b,
            d: self.d,
        }
    }

    pub fn trunk_channels(&self) -> usize {
        *self.block_channels.last().expect("validated")
    }

    pub(crate) fn block_settings(&self) -> BlockSettings {
        BlockSettings {
            leaky_slope: self.leaky_slope,
            dropout_rate: self.dropout_rate,
            bn_eps: self.bn_eps,
        }
    }
}

/// All trainable tensors.
#[derive(Debug, Clone, PartialEq)]
pub struct ModelParams {
    pub blocks: Vec<BlockParams>,
    pub pcsf: PcsfParams,
    /// `pcsf_out_channels x num_classes`
    pub head_w: Array2<f64>,
    pub head_b: Array1<f64>,
}

impl ModelParams {
    /// Uniform fan-in weights, zero biases, unit/zero batch-norm affine.
    pub fn init(config: &ModelConfig, agg: &Aggregation, schedule: &SqueezeSchedule, seed: u64) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut c_in = config.input_channels;
        let mut blocks = Vec::with_capacity(config.block_channels.len());
        for &c_out in &config.block_channels {
            blocks.push(BlockParams::init(agg, c_in, c_out, &mut rng));
            c_in = c_out;
        }
        let pcsf = PcsfParams::init(schedule, config.pcsf_out_channels, &mut rng);
        let bound = 1.0 / (config.pcsf_out_channels as f64).sqrt();
        let head_w = Array2::from_shape_simple_fn((config.pcsf_out_channels, config.num_classes), || {
            rand::Rng::random_range(&mut rng, -bound..bound)
        });
        ModelParams {
            blocks,
            pcsf,
            head_w,
            head_b: Array1::zeros(config.num_classes),
        }
    }

    pub fn zeros_like(&self) -> Self {
        ModelParams {
            blocks: self.blocks.iter().map(BlockParams::zeros_like).collect(),
            pcsf: self.pcsf.zeros_like(),
            head_w: Array2::zeros(self.head_w.raw_dim()),
            head_b: Array1::zeros(self.head_b.raw_dim()),
        }
    }

    /// `(canonical name, shape, values)` for every trainable tensor, in a fixed order.
    pub fn tensors(&self) -> Vec<(String, Vec<usize>, &[f64])> {
        let mut out = Vec::new();
        for (bi, block) in self.blocks.iter().enumerate() {
            let b = bi + 1;
            for (i, (nbrs, ws)) in block.lcn.neighbors.iter().zip(&block.lcn.weights).enumerate() {
                for (&j, w) in nbrs.iter().zip(ws) {
                    out.push((format!("block{b}.lcn.W.{}.{}", i + 1, j + 1), w.shape().to_vec(), slice(w)));
                }
            }
            for (i, bias) in block.lcn.bias.iter().enumerate() {
                out.push((format!("block{b}.lcn.bias.{}", i + 1), bias.shape().to_vec(), slice1(bias)));
            }
            out.push((format!("block{b}.bn.gamma"), block.bn.gamma.shape().to_vec(), slice(&block.bn.gamma)));
            out.push((format!("block{b}.bn.beta"), block.bn.beta.shape().to_vec(), slice(&block.bn.beta)));
        }
        for (m, w) in self.pcsf.wm.iter().enumerate() {
            out.push((format!("pcsf.Wm.{}", m + 1), w.shape().to_vec(), slice(w)));
        }
        out.push(("head.W".into(), self.head_w.shape().to_vec(), slice(&self.head_w)));
        out.push(("head.b".into(), self.head_b.shape().to_vec(), slice1(&self.head_b)));
        out
    }

    /// Mutable views in the same order as [`ModelParams::tensors`].
    pub fn tensors_mut(&mut self) -> Vec<&mut [f64]> {
        let mut out: Vec<&mut [f64]> = Vec::new();
        for block in self.blocks.iter_mut() {
            for w in block.lcn.weights.iter_mut().flatten() {
                out.push(w.as_slice_mut().expect("standard layout"));
            }
            for bias in block.lcn.bias.iter_mut() {
                out.push(bias.as_slice_mut().expect("standard layout"));
            }
            out.push(block.bn.gamma.as_slice_mut().expect("standard layout"));
            out.push(block.bn.beta.as_slice_mut().expect("standard layout"));
        }
        for w in self.pcsf.wm.iter_mut() {
            out.push(w.as_slice_mut().expect("standard layout"));
        }
        out.push(self.head_w.as_slice_mut().expect("standard layout"));
        out.push(self.head_b.as_slice_mut().expect("standard layout"));
        out
    }

    pub fn parameter_count(&self) -> usize {
        self.tensors().iter().map(|(_, _, v)| v.len()).sum()
    }

    /// Trainable parameter count per top-level component (`block1`, `pcsf`, `head`, ...).
    pub fn count_by_component(&self) -> Vec<(String, usize)> {
        let mut out: Vec<(String, usize)> = Vec::new();
        for (name, _, v) in self.tensors() {
            let comp = name.split('.').next().unwrap_or_default().to_string();
            match out.last_mut() {
                Some((c, n)) if *c == comp => *n += v.len(),
                _ => out.push((comp, v.len())),
            }
        }
        out
    }
}

fn slice(a: &Array2<f64>) -> &[f64] {
    a.as_slice().expect("standard layout")
}

fn slice1(a: &Array1<f64>) -> &[f64] {
    a.as_slice().expect("standard layout")
}
