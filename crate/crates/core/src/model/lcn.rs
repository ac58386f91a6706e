//! Locally connected graph layer.
//!
//! Every ordered pair `(i, j)` with `j` in the receptive field of `i` owns a
//! separate `C_in x C_out` matrix; nothing is shared across target nodes.
//! Features are stored per node as `rows x channels` matrices, where rows
//! index (clip, frame) samples. The layer is linear; activation is applied
//! by the surrounding block.

use ndarray::linalg::general_mat_mul;
use ndarray::{Array1, Array2, Axis};
use rand::Rng;

use crate::error::{Error, Result};
use crate::graph::Aggregation;

#[derive(Debug, Clone, PartialEq)]
pub struct LcnParams {
    pub c_in: usize,
    pub c_out: usize,
    /// `neighbors[i]` mirrors the aggregation order for node `i`.
    pub neighbors: Vec<Vec<usize>>,
    /// `weights[i][n]` is `W_j^i` for `j = neighbors[i][n]`.
    pub weights: Vec<Vec<Array2<f64>>>,
    pub bias: Vec<Array1<f64>>,
}

impl LcnParams {
    pub fn zeros(agg: &Aggregation, c_in: usize, c_out: usize) -> Self {
        let neighbors: Vec<Vec<usize>> = agg
            .nodes
            .iter()
            .map(|n| n.iter().map(|&(j, _)| j).collect())
            .collect();
        let weights = neighbors
            .iter()
            .map(|n| n.iter().map(|_| Array2::zeros((c_in, c_out))).collect())
            .collect();
        LcnParams {
            c_in,
            c_out,
            weights,
            bias: vec![Array1::zeros(c_out); agg.node_count()],
            neighbors,
        }
    }

    /// Uniform fan-in initialization, zero bias.
    pub fn init<R: Rng>(agg: &Aggregation, c_in: usize, c_out: usize, rng: &mut R) -> Self {
        let mut p = Self::zeros(agg, c_in, c_out);
        let bound = 1.0 / (c_in as f64).sqrt();
        for w in p.weights.iter_mut().flatten() {
            w.mapv_inplace(|_| rng.random_range(-bound..bound));
        }
        p
    }

    pub fn zeros_like(&self) -> Self {
        let mut z = self.clone();
        z.weights.iter_mut().flatten().for_each(|w| w.fill(0.0));
        z.bias.iter_mut().for_each(|b| b.fill(0.0));
        z
    }

    fn check(&self, agg: &Aggregation, x: &[Array2<f64>], layer: &str) -> Result<()> {
        if x.len() != self.neighbors.len() || agg.node_count() != self.neighbors.len() {
            return Err(Error::dim(
                layer,
                format!("expected {} nodes, got {}", self.neighbors.len(), x.len()),
            ));
        }
        for (i, n) in agg.nodes.iter().enumerate() {
            if n.len() != self.neighbors[i].len()
                || n.iter().zip(&self.neighbors[i]).any(|(&(j, _), &k)| j != k)
            {
                return Err(Error::dim(layer, format!("neighborhood of node {} differs", i + 1)));
            }
        }
        if let Some((i, xi)) = x.iter().enumerate().find(|(_, xi)| xi.ncols() != self.c_in) {
            return Err(Error::dim(
                layer,
                format!("node {} has {} channels, expected {}", i + 1, xi.ncols(), self.c_in),
            ));
        }
        Ok(())
    }

    /// `h_i = sum_j a_ij x_j W_j^i + bias_i` for every node.
    pub fn forward(&self, agg: &Aggregation, x: &[Array2<f64>], layer: &str) -> Result<Vec<Array2<f64>>> {
        self.check(agg, x, layer)?;
        let rows = x[0].nrows();
        Ok(agg
            .nodes
            .iter()
            .enumerate()
            .map(|(i, nbrs)| {
                let mut h = Array2::from_shape_fn((rows, self.c_out), |(_, c)| self.bias[i][c]);
                for (n, &(j, a)) in nbrs.iter().enumerate() {
                    general_mat_mul(a, &x[j], &self.weights[i][n], 1.0, &mut h);
                }
                h
            })
            .collect())
    }

    /// Returns parameter gradients and the input gradient.
    pub fn backward(
        &self,
        agg: &Aggregation,
        x: &[Array2<f64>],
        dh: &[Array2<f64>],
    ) -> (LcnParams, Vec<Array2<f64>>) {
        let mut grads = self.zeros_like();
        let mut dx: Vec<Array2<f64>> = x.iter().map(|xi| Array2::zeros(xi.raw_dim())).collect();
        for (i, nbrs) in agg.nodes.iter().enumerate() {
            grads.bias[i] = dh[i].sum_axis(Axis(0));
            for (n, &(j, a)) in nbrs.iter().enumerate() {
                general_mat_mul(a, &x[j].t(), &dh[i], 0.0, &mut grads.weights[i][n]);
                general_mat_mul(a, &dh[i], &self.weights[i][n].t(), 1.0, &mut dx[j]);
            }
        }
        (grads, dx)
    }
}

/// Single-frame form: `x` is `nodes x C_in`, output `nodes x C_out` after `activation`.
pub fn lcn_forward(
    x: &Array2<f64>,
    params: &LcnParams,
    agg: &Aggregation,
    activation: impl Fn(f64) -> f64,
) -> Result<Array2<f64>> {
    let per_node: Vec<Array2<f64>> = x
        .axis_iter(Axis(0))
        .map(|row| row.to_owned().insert_axis(Axis(0)))
        .collect();
    let h = params.forward(agg, &per_node, "lcn")?;
    let mut out = Array2::zeros((h.len(), params.c_out));
    for (i, hi) in h.iter().enumerate() {
        out.row_mut(i).assign(&hi.row(0).mapv(&activation));
    }
    Ok(out)
}
