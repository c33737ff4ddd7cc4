//! Next-frame pre-training, affinity fine-tuning, early stopping, and
//! encoder transfer between the two.

mod config;
mod data;
mod run;
mod steps;
mod transfer;

pub use config::{GraphConfig, ModelConfig, Task, TrainConfig};
pub use data::{
    affinity_samples, build_complex, identity_baseline, pretrain_samples, AffinitySample, ComplexGraphs,
    PretrainSample,
};
pub use run::{mean_loss, run_training, write_history, EarlyStopping, EpochRecord, Objective, TrainOutcome};
pub use steps::{
    finetune_loss, finetune_step, head_spec, init_head, init_model, predict_affinity, predict_var, pretrain_loss,
    pretrain_step, set_head_bias, HEAD_PREFIX,
};
pub use transfer::{transfer_weights, TransferReport};

use crate::diffcore::ParamStore;
use crate::error::Result;
use crate::evalmetrics::Residual;

/// Label and prediction for every sample, in input order.
pub fn affinity_residuals(store: &ParamStore, cfg: &ModelConfig, samples: &[AffinitySample]) -> Result<Vec<Residual>> {
    samples
        .iter()
        .map(|s| {
            Ok(Residual {
                target_id: s.target_id.clone(),
                label: s.label,
                prediction: predict_affinity(store, cfg, &s.graphs)?,
            })
        })
        .collect()
}
