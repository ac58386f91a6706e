//! The full classifier: GNN blocks, PCSF, global average pooling, linear head.

use ndarray::{Array2, Axis};
use rand_chacha::ChaCha8Rng;

use super::block::{block_backward, block_forward, update_running, BlockCache, Mode, RunningStats};
use super::params::{ModelConfig, ModelParams};
use super::pcsf::{pcsf_forward, pcsf_node_mean, pcsf_node_mean_backward};
use crate::error::{Error, Result};
use crate::graph::{build_graph, Aggregation, SkeletalGraph, SqueezeSchedule};
use crate::pose::NODE_COUNT;

#[derive(Debug, Clone)]
pub struct Model {
    pub config: ModelConfig,
    pub graph: SkeletalGraph,
    pub aggregation: Aggregation,
    pub schedule: SqueezeSchedule,
    pub params: ModelParams,
    pub running: Vec<RunningStats>,
}

/// Per-frame output of an evaluation pass.
#[derive(Debug, Clone)]
pub struct EvalOutput {
    /// `clips x classes`
    pub logits: Array2<f64>,
    /// Per clip, `frames x nodes` L2 norms of the PCSF node outputs.
    pub activations: Vec<Array2<f64>>,
}

/// Intermediates recorded by [`Model::forward_train`].
#[derive(Debug, Clone)]
pub struct TrainCache {
    block_inputs: Vec<Vec<Array2<f64>>>,
    blocks: Vec<BlockCache>,
    trunk_mean: Vec<Array2<f64>>,
    pooled: Array2<f64>,
    clip_len: usize,
}

impl Model {
    pub fn new(config: ModelConfig, seed: u64) -> Result<Self> {
        config.validate()?;
        let graph = build_graph();
        let aggregation = graph.aggregation();
        let schedule = SqueezeSchedule::new(&graph, config.trunk_channels(), config.ratios())?;
        let params = ModelParams::init(&config, &aggregation, &schedule, seed);
        let running = config
            .block_channels
            .iter()
            .map(|&c| RunningStats::new(NODE_COUNT, c))
            .collect();
        Ok(Model {
            config,
            graph,
            aggregation,
            schedule,
            params,
            running,
        })
    }

    fn clip_values(&self) -> usize {
        self.config.clip_len * NODE_COUNT * self.config.input_channels
    }

    /// Rearranges clips into per-node `(clips * frames) x channels` matrices.
    pub fn input_nodes(&self, clips: &[&[f64]]) -> Result<Vec<Array2<f64>>> {
        if clips.is_empty() {
            return Err(Error::dim("input", "empty batch"));
        }
        let expected = self.clip_values();
        if let Some((i, c)) = clips.iter().enumerate().find(|(_, c)| c.len() != expected) {
            return Err(Error::dim(
                "input",
                format!(
                    "clip {i} has {} values, expected {} ({} frames x {NODE_COUNT} nodes x {} channels)",
                    c.len(),
                    expected,
                    self.config.clip_len,
                    self.config.input_channels
                ),
            ));
        }
        let ch = self.config.input_channels;
        let rows = clips.len() * self.config.clip_len;
        let mut nodes = vec![Array2::zeros((rows, ch)); NODE_COUNT];
        for (b, clip) in clips.iter().enumerate() {
            for (t, frame) in clip.chunks_exact(NODE_COUNT * ch).enumerate() {
                let r = b * self.config.clip_len + t;
                for (k, node) in nodes.iter_mut().enumerate() {
                    for c in 0..ch {
                        node[[r, c]] = frame[k * ch + c];
                    }
                    if !self.config.use_confidence {
                        node[[r, ch - 1]] = 0.0;
                    }
                }
            }
        }
        Ok(nodes)
    }

    fn trunk(
        &self,
        clips: &[&[f64]],
        mut mode: Mode<'_>,
    ) -> Result<(Vec<Array2<f64>>, Vec<Vec<Array2<f64>>>, Vec<BlockCache>)> {
        let mut x = self.input_nodes(clips)?;
        let keep_inputs = mode.is_train();
        let mut inputs = Vec::new();
        let mut caches = Vec::new();
        for (bi, (params, running)) in self.params.blocks.iter().zip(&self.running).enumerate() {
            let (out, cache) = block_forward(
                &x,
                params,
                running,
                &self.aggregation,
                self.config.block_settings(),
                mode.reborrow(),
                &format!("block{}.lcn", bi + 1),
            )?;
            if keep_inputs {
                inputs.push(std::mem::replace(&mut x, out));
            } else {
                x = out;
            }
            caches.extend(cache);
        }
        Ok((x, inputs, caches))
    }

    fn frame_mean(&self, x: &[Array2<f64>], clips: usize) -> Vec<Array2<f64>> {
        let len = self.config.clip_len;
        x.iter()
            .map(|xk| {
                let c = xk.ncols();
                xk.to_shape((clips, len, c))
                    .expect("rows are clip-major")
                    .mean_axis(Axis(1))
                    .expect("clip_len > 0")
            })
            .collect()
    }

    fn head(&self, pooled: &Array2<f64>) -> Array2<f64> {
        pooled.dot(&self.params.head_w) + &self.params.head_b
    }

    /// Training-mode forward. Frames are averaged before the PCSF projection,
    /// which yields the same logits as pooling after it.
    pub fn forward_train(&self, clips: &[&[f64]], rng: &mut ChaCha8Rng) -> Result<(Array2<f64>, TrainCache)> {
        let (x, block_inputs, blocks) = self.trunk(clips, Mode::Train(rng))?;
        let trunk_mean = self.frame_mean(&x, clips.len());
        let pooled = pcsf_node_mean(&trunk_mean, &self.params.pcsf, &self.schedule)?;
        let logits = self.head(&pooled);
        Ok((
            logits,
            TrainCache {
                block_inputs,
                blocks,
                trunk_mean,
                pooled,
                clip_len: self.config.clip_len,
            },
        ))
    }

    /// Gradients of `sum(d_logits * logits)` with respect to every trainable tensor.
    pub fn backward(&self, cache: &TrainCache, d_logits: &Array2<f64>) -> Result<ModelParams> {
        let mut grads = self.params.zeros_like();
        grads.head_w = cache.pooled.t().dot(d_logits);
        grads.head_b = d_logits.sum_axis(Axis(0));
        let d_pooled = d_logits.dot(&self.params.head_w.t());

        let (pcsf_grads, d_mean) =
            pcsf_node_mean_backward(&cache.trunk_mean, &self.params.pcsf, &self.schedule, &d_pooled)?;
        grads.pcsf = pcsf_grads;

        let len = cache.clip_len;
        let mut d: Vec<Array2<f64>> = d_mean
            .iter()
            .map(|dm| {
                let (clips, c) = dm.dim();
                Array2::from_shape_fn((clips * len, c), |(r, ch)| dm[[r / len, ch]] / len as f64)
            })
            .collect();

        for bi in (0..self.params.blocks.len()).rev() {
            let (g, dx) = block_backward(
                &cache.block_inputs[bi],
                &self.params.blocks[bi],
                &cache.blocks[bi],
                &self.aggregation,
                self.config.block_settings(),
                &d,
            );
            grads.blocks[bi] = g;
            d = dx;
        }
        Ok(grads)
    }

    /// Folds the batch statistics of a training pass into the running averages.
    pub fn absorb_batch_stats(&mut self, cache: &TrainCache) {
        for (running, block) in self.running.iter_mut().zip(&cache.blocks) {
            update_running(running, block, self.config.bn_momentum);
        }
    }

    /// Evaluation-mode logits only, using the pooled route.
    pub fn predict_logits(&self, clips: &[&[f64]]) -> Result<Array2<f64>> {
        let (x, _, _) = self.trunk(clips, Mode::Eval)?;
        let mean = self.frame_mean(&x, clips.len());
        Ok(self.head(&pcsf_node_mean(&mean, &self.params.pcsf, &self.schedule)?))
    }

    /// Evaluation-mode forward with PCSF applied per frame, retaining node activations.
    pub fn forward_eval(&self, clips: &[&[f64]]) -> Result<EvalOutput> {
        let (x, _, _) = self.trunk(clips, Mode::Eval)?;
        let out = pcsf_forward(&x, &self.params.pcsf, &self.schedule)?;
        let len = self.config.clip_len;
        let p = self.params.pcsf.out_channels();
        let mut pooled = Array2::zeros((clips.len(), p));
        let mut activations = vec![Array2::zeros((len, NODE_COUNT)); clips.len()];
        for (m, om) in out.iter().enumerate() {
            for (r, row) in om.axis_iter(Axis(0)).enumerate() {
                let (b, t) = (r / len, r % len);
                activations[b][[t, m]] = row.dot(&row).sqrt();
                let mut dst = pooled.row_mut(b);
                dst += &row;
            }
        }
        pooled /= (len * NODE_COUNT) as f64;
        Ok(EvalOutput {
            logits: self.head(&pooled),
            activations,
        })
    }
}
