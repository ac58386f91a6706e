//! The classifier network and its hand-written backward pass.

mod attention;
mod block;
mod checkpoint;
mod lcn;
mod network;
mod ops;
mod params;
mod pcsf;

pub use attention::{attention_weights, mean_weights, normalize_weights, JointWeights};
pub use block::{
    block_backward, block_forward, update_running, BatchNormParams, BlockCache, BlockParams,
    BlockSettings, Mode, RunningStats,
};
pub use checkpoint::{Checkpoint, TensorRecord, CHECKPOINT_FORMAT, CHECKPOINT_VERSION};
pub use lcn::{lcn_forward, LcnParams};
pub use network::{EvalOutput, Model, TrainCache};
pub use ops::{
    channel_squeeze, leaky_relu, softmax, squeeze_groups, squeeze_rows, squeeze_rows_backward,
};
pub use params::{ModelConfig, ModelParams};
pub use pcsf::{pcsf_backward, pcsf_forward, pcsf_node_mean, pcsf_node_mean_backward, PcsfParams};
