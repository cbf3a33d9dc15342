//! SE(3)-Transformer and TFN models, training and persistence.

mod config;
mod equivariance;
mod network;
mod persist;
mod predict;
mod train;

pub use config::{LossKind, ModelConfig, ModelKind, TrainConfig};
pub use equivariance::{check_equivariance, EquivarianceOptions, EquivarianceReport, StageDeviation, KERNEL_STAGE};
pub use network::{se3_transformer_forward, tfn_forward, Model, Trace};
pub use persist::{load_params, save_params, SavedModel};
pub use predict::{eval_threads, predict, THREADS_ENV};
pub use train::{
    common_targets, evaluate_mae, metrics_csv, split_dataset, train, Adam, EpochMetrics, LabelStats, Split, TrainOutcome,
};

#[cfg(test)]
mod tests;
