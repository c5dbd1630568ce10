//! Graph neural network trained from scratch.

pub mod adam;
pub mod linalg;
pub mod model;
pub mod train;

pub use adam::{adam_step, adam_update, AdamHyper, AdamState};
pub use linalg::Matrix;
pub use model::{
    forward, loss_and_grad, predict, sample_features, type_features, Activation, ModelConfig, ModelParams,
};
pub use train::{
    cross_validate, cross_validate_observed, fold_assignment, train_fold, train_fold_observed, EpochObserver,
    EpochRecord, FoldRecord, MeanStd, TrainRecord,
};
