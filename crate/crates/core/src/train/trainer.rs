//! Per-fold training loop and the cross-validation driver.

use std::collections::HashMap;
use std::path::Path;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use super::adam::Adam;
use super::config::TrainConfig;
use super::focal::{batch_focal_loss, inverse_frequency_alpha};
use super::folds::{make_folds, FoldItem, FoldPlan};
use crate::error::{Error, Result};
use crate::model::{softmax, Model};
use crate::pose::Clip;

/// One row of the per-fold history file.
#[derive(Debug, Clone, PartialEq)]
pub struct EpochRecord {
    pub epoch: usize,
    pub train_loss: f64,
    pub val_loss: f64,
    /// Clip-level balanced accuracy on the validation fold.
    pub val_bal_acc: f64,
    pub lr: f64,
}

#[derive(Debug, Clone)]
pub struct FoldResult {
    pub fold: usize,
    /// Parameters from the epoch with the lowest validation loss.
    pub model: Model,
    pub best_epoch: usize,
    pub history: Vec<EpochRecord>,
    pub alpha: Vec<f64>,
}

pub fn write_history(path: &Path, history: &[EpochRecord]) -> Result<()> {
    crate::io::write_csv_atomic(path, |w| {
        w.write_record(["epoch", "train_loss", "val_loss", "val_bal_acc", "lr"])?;
        for r in history {
            w.write_record([
                r.epoch.to_string(),
                r.train_loss.to_string(),
                r.val_loss.to_string(),
                r.val_bal_acc.to_string(),
                r.lr.to_string(),
            ])?;
        }
        Ok(())
    })
}

/// Derives independent seeds for each fold and purpose.
pub fn derive_seed(seed: u64, fold: usize, purpose: u64) -> u64 {
    let mut z = seed
        .wrapping_add(0x9E37_79B9_7F4A_7C15u64.wrapping_mul(fold as u64 + 1))
        .wrapping_add(purpose.wrapping_mul(0xD1B5_4A32_D192_ED03));
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Reduce-on-plateau learning-rate schedule.
#[derive(Debug, Clone)]
pub struct PlateauSchedule {
    pub lr: f64,
    factor: f64,
    floor: f64,
    patience: usize,
    best: f64,
    stale: usize,
}

impl PlateauSchedule {
    pub fn new(lr: f64, factor: f64, floor: f64, patience: usize) -> Self {
        PlateauSchedule {
            lr,
            factor,
            floor,
            patience,
            best: f64::INFINITY,
            stale: 0,
        }
    }

    /// Records a validation loss; returns true if the rate was reduced.
    pub fn observe(&mut self, loss: f64) -> bool {
        if loss < self.best * (1.0 - 1e-4) {
            self.best = loss;
            self.stale = 0;
            return false;
        }
        self.stale += 1;
        if self.stale > self.patience {
            self.stale = 0;
            let next = (self.lr * self.factor).max(self.floor);
            let reduced = next < self.lr;
            self.lr = next;
            return reduced;
        }
        false
    }
}

pub fn class_ids(clips: &[&Clip], config: &TrainConfig) -> Result<Vec<usize>> {
    clips
        .iter()
        .map(|c| {
            config.mode.class_of(c.label).ok_or_else(|| {
                Error::Validation(format!("clip {} has label {} outside the task", c.id(), c.label))
            })
        })
        .collect()
}

/// Mean focal loss and clip-level balanced accuracy in evaluation mode.
fn evaluate(model: &Model, clips: &[&Clip], labels: &[usize], config: &TrainConfig, alpha: &[f64]) -> Result<(f64, f64)> {
    let classes = config.mode.num_classes();
    let mut total = 0.0;
    let mut hits = vec![0usize; classes];
    let mut support = vec![0usize; classes];
    for (chunk, ys) in clips.chunks(32).zip(labels.chunks(32)) {
        let data: Vec<&[f64]> = chunk.iter().map(|c| c.data.as_slice()).collect();
        let logits = model.predict_logits(&data)?;
        let (loss, _) = batch_focal_loss(&logits, ys, config.focal_gamma, alpha);
        total += loss * ys.len() as f64;
        for (row, &y) in logits.rows().into_iter().zip(ys) {
            let p = softmax(&row.to_vec());
            let pred = argmax(&p);
            support[y] += 1;
            hits[y] += (pred == y) as usize;
        }
    }
    let recalls: Vec<f64> = hits
        .iter()
        .zip(&support)
        .filter(|(_, &s)| s > 0)
        .map(|(&h, &s)| h as f64 / s as f64)
        .collect();
    let bal = recalls.iter().sum::<f64>() / recalls.len().max(1) as f64;
    Ok((total / clips.len() as f64, bal))
}

pub(crate) fn argmax(v: &[f64]) -> usize {
    let mut best = 0;
    for (i, &x) in v.iter().enumerate() {
        if x > v[best] {
            best = i;
        }
    }
    best
}

/// Trains one model on the clips whose videos are outside `fold`.
pub fn train_fold(clips: &[Clip], plan: &FoldPlan, fold: usize, config: &TrainConfig) -> Result<FoldResult> {
    config.validate()?;
    let (train, val): (Vec<&Clip>, Vec<&Clip>) = clips
        .iter()
        .filter(|c| plan.fold_of(&c.video_id).is_some())
        .partition(|c| plan.fold_of(&c.video_id) != Some(fold));
    if train.is_empty() {
        return Err(Error::Config(format!("fold {fold} has no training clips")));
    }
    train_on(&train, &val, fold, config)
}

/// Trains on explicit clip lists. With no validation clips the training
/// loss drives checkpoint selection and the schedule.
pub fn train_on(train: &[&Clip], val: &[&Clip], fold: usize, config: &TrainConfig) -> Result<FoldResult> {
    config.validate()?;
    if train.is_empty() {
        return Err(Error::Config(format!("fold {fold} has no training clips")));
    }
    let train_y = class_ids(train, config)?;
    let val_y = class_ids(val, config)?;
    let classes = config.mode.num_classes();
    let alpha = config
        .focal_alpha
        .clone()
        .unwrap_or_else(|| inverse_frequency_alpha(&train_y, classes));

    let mut model = Model::new(config.model.clone(), derive_seed(config.seed, fold, 0))?;
    let mut shuffle_rng = ChaCha8Rng::seed_from_u64(derive_seed(config.seed, fold, 1));
    let mut dropout_rng = ChaCha8Rng::seed_from_u64(derive_seed(config.seed, fold, 2));
    let mut adam = Adam::new(&model.params, config.lr, config.adam_beta1, config.adam_beta2, config.adam_eps);
    let mut schedule = PlateauSchedule::new(config.lr, config.lr_decay_factor, config.lr_floor, config.plateau_patience);

    let mut order: Vec<usize> = (0..train.len()).collect();
    let mut history = Vec::with_capacity(config.max_epochs);
    let mut best: Option<(f64, usize, Model)> = None;

    for epoch in 1..=config.max_epochs {
        order.shuffle(&mut shuffle_rng);
        let mut epoch_loss = 0.0;
        for batch in order.chunks(config.batch_size) {
            let data: Vec<&[f64]> = batch.iter().map(|&i| train[i].data.as_slice()).collect();
            let ys: Vec<usize> = batch.iter().map(|&i| train_y[i]).collect();
            let (logits, cache) = model.forward_train(&data, &mut dropout_rng)?;
            let (loss, d_logits) = batch_focal_loss(&logits, &ys, config.focal_gamma, &alpha);
            let grads = model.backward(&cache, &d_logits)?;
            model.absorb_batch_stats(&cache);
            adam.step(&mut model.params, &grads);
            epoch_loss += loss * batch.len() as f64;
        }
        let train_loss = epoch_loss / train.len() as f64;

        let (val_loss, val_bal_acc) = if val.is_empty() {
            (f64::NAN, f64::NAN)
        } else {
            evaluate(&model, val, &val_y, config, &alpha)?
        };
        let monitor = if val.is_empty() { train_loss } else { val_loss };
        history.push(EpochRecord {
            epoch,
            train_loss,
            val_loss,
            val_bal_acc,
            lr: adam.lr,
        });
        log::debug!("fold {fold} epoch {epoch}: train {train_loss:.5} val {val_loss:.5} acc {val_bal_acc:.3}");

        if best.as_ref().is_none_or(|(b, _, _)| monitor < *b) {
            best = Some((monitor, epoch, model.clone()));
        }
        if schedule.observe(monitor) {
            log::info!("fold {fold} epoch {epoch}: learning rate reduced to {}", schedule.lr);
        }
        adam.lr = schedule.lr;

        let best_epoch = best.as_ref().map_or(epoch, |b| b.1);
        if config.early_stop_patience > 0 && epoch - best_epoch >= config.early_stop_patience {
            log::info!("fold {fold}: stopping at epoch {epoch}, best epoch {best_epoch}");
            break;
        }
    }

    let (_, best_epoch, model) = best.ok_or_else(|| Error::Config("max_epochs must be at least 1".into()))?;
    Ok(FoldResult {
        fold,
        model,
        best_epoch,
        history,
        alpha,
    })
}

/// Builds the fold plan over the videos present in `clips`.
pub fn plan_folds(clips: &[Clip], config: &TrainConfig) -> Result<FoldPlan> {
    let mut seen: HashMap<&str, FoldItem> = HashMap::new();
    for c in clips {
        let class = config
            .mode
            .class_of(c.label)
            .ok_or_else(|| Error::Validation(format!("clip {} has label {}", c.id(), c.label)))?;
        seen.entry(c.video_id.as_str()).or_insert_with(|| FoldItem {
            video_id: c.video_id.clone(),
            class,
            group: if config.group_by_participant {
                c.participant_id.clone()
            } else {
                c.video_id.clone()
            },
        });
    }
    let mut items: Vec<FoldItem> = seen.into_values().collect();
    items.sort_by(|a, b| a.video_id.cmp(&b.video_id));
    make_folds(&items, config.folds, config.seed)
}

/// Trains every fold; folds run on the rayon pool and are independent.
pub fn cross_validate(clips: &[Clip], plan: &FoldPlan, config: &TrainConfig) -> Result<Vec<FoldResult>> {
    (0..plan.k)
        .into_par_iter()
        .map(|fold| train_fold(clips, plan, fold, config))
        .collect()
}
