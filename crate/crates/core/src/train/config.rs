//! Training configuration and its flat `key = value` file format.
//!
//! Keys are the field names of [`TrainConfig`]; `#` starts a comment.
//! `focal_alpha` is a comma-separated list or `auto` (inverse class
//! frequency). Model keys (`clip_len`, `block_channels`, `b`, `d`,
//! `dropout_rate`, `leaky_slope`, `pcsf_out_channels`, `use_confidence`) are
//! accepted in the same file.

use std::path::Path;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::ModelConfig;
use crate::pose::TaskMode;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainConfig {
    pub mode: TaskMode,
    pub lr: f64,
    pub lr_decay_factor: f64,
    pub lr_floor: f64,
    pub batch_size: usize,
    pub max_epochs: usize,
    pub focal_gamma: f64,
    /// `None` selects inverse class frequency over the training clips.
    pub focal_alpha: Option<Vec<f64>>,
    pub seed: u64,
    pub plateau_patience: usize,
    /// Stop a fold after this many epochs without a new best validation
    /// loss; 0 trains to `max_epochs`.
    pub early_stop_patience: usize,
    pub folds: usize,
    pub group_by_participant: bool,
    pub adam_beta1: f64,
    pub adam_beta2: f64,
    pub adam_eps: f64,
    pub model: ModelConfig,
}

impl TrainConfig {
    pub fn for_mode(mode: TaskMode) -> Self {
        let (lr, batch_size) = match mode {
            TaskMode::Binary => (0.01, 16),
            TaskMode::Multiclass => (0.001, 8),
        };
        TrainConfig {
            mode,
            lr,
            lr_decay_factor: 0.1,
            lr_floor: 1e-5,
            batch_size,
            max_epochs: 500,
            focal_gamma: 2.0,
            focal_alpha: None,
            seed: 0,
            plateau_patience: 25,
            early_stop_patience: 0,
            folds: 5,
            group_by_participant: false,
            adam_beta1: 0.9,
            adam_beta2: 0.999,
            adam_eps: 1e-8,
            model: ModelConfig {
                num_classes: mode.num_classes(),
                ..ModelConfig::default()
            },
        }
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: &str| Err(Error::Config(m.into()));
        if !(self.lr > 0.0) {
            return bad("lr must be positive");
        }
        if self.batch_size == 0 {
            return bad("batch_size must be at least 1");
        }
        if !(self.focal_gamma >= 0.0) {
            return bad("focal_gamma must be non-negative");
        }
        if !(self.lr_decay_factor > 0.0 && self.lr_decay_factor <= 1.0) {
            return bad("lr_decay_factor must be in (0, 1]");
        }
        if self.folds < 2 {
            return bad("folds must be at least 2");
        }
        if let Some(alpha) = &self.focal_alpha {
            if alpha.len() != self.mode.num_classes() || alpha.iter().any(|a| !(*a >= 0.0)) {
                return bad("focal_alpha needs one non-negative weight per class");
            }
        }
        if self.model.num_classes != self.mode.num_classes() {
            return bad("model num_classes does not match the task mode");
        }
        self.model.validate()
    }

    /// Reads a config file on top of the defaults for the mode it declares.
    pub fn from_file(path: &Path, mode: Option<TaskMode>) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_kv(&text, mode)
    }

    pub fn from_kv(text: &str, mode: Option<TaskMode>) -> Result<Self> {
        let pairs = parse_kv(text)?;
        let file_mode = pairs
            .iter()
            .find(|(k, _)| k == "mode")
            .map(|(_, v)| v.parse::<TaskMode>())
            .transpose()?;
        let mut cfg = Self::for_mode(mode.or(file_mode).unwrap_or(TaskMode::Binary));
        for (k, v) in &pairs {
            if k != "mode" {
                cfg.set(k, v)?;
            }
        }
        Ok(cfg)
    }

    /// Sets one field from its textual value.
    pub fn set(&mut self, key: &str, value: &str) -> Result<()> {
        let v = value.trim();
        match key {
            "mode" => {
                let mode: TaskMode = v.parse()?;
                if mode != self.mode {
                    let mut fresh = Self::for_mode(mode);
                    fresh.seed = self.seed;
                    *self = fresh;
                }
            }
            "lr" => self.lr = num(key, v)?,
            "lr_decay_factor" => self.lr_decay_factor = num(key, v)?,
            "lr_floor" => self.lr_floor = num(key, v)?,
            "batch_size" => self.batch_size = num(key, v)?,
            "max_epochs" => self.max_epochs = num(key, v)?,
            "focal_gamma" => self.focal_gamma = num(key, v)?,
            "focal_alpha" => {
                self.focal_alpha = if v.eq_ignore_ascii_case("auto") {
                    None
                } else {
                    Some(list(key, v)?)
                }
            }
            "seed" => self.seed = num(key, v)?,
            "plateau_patience" => self.plateau_patience = num(key, v)?,
            "early_stop_patience" => self.early_stop_patience = num(key, v)?,
            "folds" => self.folds = num(key, v)?,
            "group_by_participant" => self.group_by_participant = num(key, v)?,
            "optimizer" => {
                if !v.eq_ignore_ascii_case("adam") {
                    return Err(Error::Config(format!("unsupported optimizer {v:?}")));
                }
            }
            "adam_beta1" => self.adam_beta1 = num(key, v)?,
            "adam_beta2" => self.adam_beta2 = num(key, v)?,
            "adam_eps" => self.adam_eps = num(key, v)?,
            "clip_len" => self.model.clip_len = num(key, v)?,
            "block_channels" => self.model.block_channels = list(key, v)?,
            "b" => self.model.b = num(key, v)?,
            "d" => self.model.d = num(key, v)?,
            "dropout_rate" => self.model.dropout_rate = num(key, v)?,
            "leaky_slope" => self.model.leaky_slope = num(key, v)?,
            "pcsf_out_channels" => self.model.pcsf_out_channels = num(key, v)?,
            "use_confidence" => self.model.use_confidence = num(key, v)?,
            other => return Err(Error::Config(format!("unknown config key {other:?}"))),
        }
        Ok(())
    }

    /// Renders the config in the same flat format it is read from.
    pub fn to_kv(&self) -> String {
        let alpha = self.focal_alpha.as_ref().map_or("auto".to_string(), |a| join(a));
        let lines = [
            ("mode", self.mode.to_string()),
            ("optimizer", "adam".into()),
            ("lr", self.lr.to_string()),
            ("lr_decay_factor", self.lr_decay_factor.to_string()),
            ("lr_floor", self.lr_floor.to_string()),
            ("batch_size", self.batch_size.to_string()),
            ("max_epochs", self.max_epochs.to_string()),
            ("focal_gamma", self.focal_gamma.to_string()),
            ("focal_alpha", alpha),
            ("seed", self.seed.to_string()),
            ("plateau_patience", self.plateau_patience.to_string()),
            ("early_stop_patience", self.early_stop_patience.to_string()),
            ("folds", self.folds.to_string()),
            ("group_by_participant", self.group_by_participant.to_string()),
            ("adam_beta1", self.adam_beta1.to_string()),
            ("adam_beta2", self.adam_beta2.to_string()),
            ("adam_eps", self.adam_eps.to_string()),
            ("clip_len", self.model.clip_len.to_string()),
            ("block_channels", join(&self.model.block_channels)),
            ("b", self.model.b.to_string()),
            ("d", self.model.d.to_string()),
            ("dropout_rate", self.model.dropout_rate.to_string()),
            ("leaky_slope", self.model.leaky_slope.to_string()),
            ("pcsf_out_channels", self.model.pcsf_out_channels.to_string()),
            ("use_confidence", self.model.use_confidence.to_string()),
        ];
        lines.iter().map(|(k, v)| format!("{k} = {v}\n")).collect()
    }
}

fn join<T: ToString>(items: &[T]) -> String {
    items.iter().map(T::to_string).collect::<Vec<_>>().join(",")
}

fn num<T: FromStr>(key: &str, v: &str) -> Result<T> {
    v.parse()
        .map_err(|_| Error::Config(format!("invalid value {v:?} for {key}")))
}

fn list<T: FromStr>(key: &str, v: &str) -> Result<Vec<T>> {
    v.split(',').map(|s| num(key, s.trim())).collect()
}

fn parse_kv(text: &str) -> Result<Vec<(String, String)>> {
    let mut out = Vec::new();
    for (n, line) in text.lines().enumerate() {
        let line = line.split('#').next().unwrap_or_default().trim();
        if line.is_empty() {
            continue;
        }
        let (k, v) = line
            .split_once('=')
            .ok_or_else(|| Error::Config(format!("line {}: expected key = value", n + 1)))?;
        out.push((k.trim().to_string(), v.trim().to_string()));
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn mode_defaults() {
        let b = TrainConfig::for_mode(TaskMode::Binary);
        assert_eq!((b.lr, b.batch_size, b.max_epochs), (0.01, 16, 500));
        let m = TrainConfig::for_mode(TaskMode::Multiclass);
        assert_eq!((m.lr, m.batch_size, m.max_epochs, m.model.num_classes), (0.001, 8, 500, 5));
        assert_eq!(m.lr_decay_factor, 0.1);
    }

    #[test]
    fn file_round_trip() {
        let mut c = TrainConfig::for_mode(TaskMode::Multiclass);
        c.seed = 42;
        c.focal_alpha = Some(vec![1.0, 2.0, 0.5, 1.0, 3.0]);
        c.model.block_channels = vec![8, 16];
        let back = TrainConfig::from_kv(&c.to_kv(), None).unwrap();
        assert_eq!(back, c);
    }

    #[test]
    fn unknown_key_rejected() {
        assert!(matches!(TrainConfig::from_kv("colour = red\n", None), Err(Error::Config(_))));
        assert!(matches!(TrainConfig::from_kv("lr 0.1\n", None), Err(Error::Config(_))));
    }

    #[test]
    fn comments_and_mode_from_file() {
        let c = TrainConfig::from_kv("# run\nmode = multiclass\nmax_epochs = 7 # short\n", None).unwrap();
        assert_eq!(c.mode, TaskMode::Multiclass);
        assert_eq!(c.max_epochs, 7);
        assert_eq!(c.lr, 0.001);
    }

    #[test]
    fn validation() {
        let mut c = TrainConfig::for_mode(TaskMode::Binary);
        c.validate().unwrap();
        c.lr = 0.0;
        assert!(c.validate().is_err());
        let mut c = TrainConfig::for_mode(TaskMode::Binary);
        c.focal_alpha = Some(vec![1.0]);
        assert!(c.validate().is_err());
    }
}
