//! Focal-loss training, fold planning and the cross-validation driver.

mod adam;
mod config;
mod focal;
mod folds;
mod trainer;

pub use adam::Adam;
pub use config::TrainConfig;
pub use focal::{batch_focal_loss, focal_loss, focal_loss_grad, inverse_frequency_alpha, PROB_FLOOR};
pub use folds::{make_folds, FoldItem, FoldPlan};
pub use trainer::{
    class_ids, cross_validate, derive_seed, plan_folds, train_fold, train_on, write_history,
    EpochRecord, FoldResult, PlateauSchedule,
};
pub(crate) use trainer::argmax;
