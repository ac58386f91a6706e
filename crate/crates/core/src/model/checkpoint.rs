//! Checkpoint archive: a single JSON document with a version tag, the model
//! config, the training seed, class names and every tensor keyed by its
//! canonical name (`block1.lcn.W.1.2`, `pcsf.Wm.3`, `head.W`, ...). Batch-norm
//! running statistics are stored as `blockN.bn.running_mean` / `running_var`.

use std::collections::BTreeMap;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::network::Model;
use super::params::ModelConfig;
use crate::error::{Error, Result};

pub const CHECKPOINT_FORMAT: &str = "spapnet-checkpoint";
pub const CHECKPOINT_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TensorRecord {
    pub shape: Vec<usize>,
    pub data: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Checkpoint {
    pub format: String,
    pub version: u32,
    pub seed: u64,
    pub config: ModelConfig,
    pub class_names: Vec<String>,
    pub tensors: BTreeMap<String, TensorRecord>,
}

impl Checkpoint {
    pub fn from_model(model: &Model, seed: u64, class_names: &[&str]) -> Self {
        let mut tensors = BTreeMap::new();
        for (name, shape, data) in model.params.tensors() {
            tensors.insert(
                name,
                TensorRecord {
                    shape,
                    data: data.to_vec(),
                },
            );
        }
        for (bi, r) in model.running.iter().enumerate() {
            for (suffix, a) in [("running_mean", &r.mean), ("running_var", &r.var)] {
                tensors.insert(
                    format!("block{}.bn.{suffix}", bi + 1),
                    TensorRecord {
                        shape: a.shape().to_vec(),
                        data: a.iter().copied().collect(),
                    },
                );
            }
        }
        Checkpoint {
            format: CHECKPOINT_FORMAT.into(),
            version: CHECKPOINT_VERSION,
            seed,
            config: model.config.clone(),
            class_names: class_names.iter().map(|s| s.to_string()).collect(),
            tensors,
        }
    }

    pub fn to_model(&self) -> Result<Model> {
        if self.format != CHECKPOINT_FORMAT {
            return Err(Error::Checkpoint(format!("unexpected format tag {:?}", self.format)));
        }
        if self.version != CHECKPOINT_VERSION {
            return Err(Error::Checkpoint(format!("unsupported version {}", self.version)));
        }
        let mut model = Model::new(self.config.clone(), self.seed)?;
        let names: Vec<(String, Vec<usize>)> = model
            .params
            .tensors()
            .into_iter()
            .map(|(n, s, _)| (n, s))
            .collect();
        for ((name, shape), dst) in names.iter().zip(model.params.tensors_mut()) {
            copy_tensor(&self.tensors, name, shape, dst)?;
        }
        for (bi, r) in model.running.iter_mut().enumerate() {
            let shape = r.mean.shape().to_vec();
            copy_tensor(
                &self.tensors,
                &format!("block{}.bn.running_mean", bi + 1),
                &shape,
                r.mean.as_slice_mut().expect("standard layout"),
            )?;
            copy_tensor(
                &self.tensors,
                &format!("block{}.bn.running_var", bi + 1),
                &shape,
                r.var.as_slice_mut().expect("standard layout"),
            )?;
        }
        Ok(model)
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        let text = serde_json::to_string(self)?;
        crate::io::write_atomic(path, text.as_bytes())
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        serde_json::from_str(&text).map_err(|e| Error::Checkpoint(format!("{}: {e}", path.display())))
    }
}

fn copy_tensor(
    tensors: &BTreeMap<String, TensorRecord>,
    name: &str,
    shape: &[usize],
    dst: &mut [f64],
) -> Result<()> {
    let rec = tensors
        .get(name)
        .ok_or_else(|| Error::Checkpoint(format!("missing tensor {name}")))?;
    if rec.shape != shape || rec.data.len() != dst.len() {
        return Err(Error::Checkpoint(format!(
            "tensor {name} has shape {:?}, expected {shape:?}",
            rec.shape
        )));
    }
    dst.copy_from_slice(&rec.data);
    Ok(())
}
