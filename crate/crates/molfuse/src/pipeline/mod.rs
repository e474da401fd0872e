//! End-to-end orchestration: splits, pretraining, fine-tuning, metrics, and
//! probe case studies.

mod case_study;
mod finetune;
mod metrics;
mod model;
mod split;
mod train;

pub use case_study::{
    case_study_chirality, case_study_rings, case_study_table, linear_probe,
    CHIRALITY_AP_REFERENCE, RING_MAE_REFERENCE,
};
pub use finetune::{finetune, FinetuneOutcome, MetricsReport, TaskReport};
pub use metrics::{mean_std, metric, MetricError, MetricKind};
pub use model::{
    batch_forward, embed_molecule, eval_alpha, init_model_params, predict, sigmoid, with_positions,
    BatchOutput, Predictions, ALL_GROUPS,
};
pub use split::{random_split, scaffold_split, DatasetSplit};
pub use train::{pretrain, PretrainOutcome};

use crate::encoders::EncoderError;
use crate::fusion::FusionError;
use crate::objective::ObjectiveError;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum PipelineError {
    #[error(transparent)]
    Encoder(#[from] EncoderError),
    #[error(transparent)]
    Objective(#[from] ObjectiveError),
    #[error(transparent)]
    Fusion(#[from] FusionError),
    #[error(transparent)]
    Metric(#[from] MetricError),
    #[error("invalid configuration: {0}")]
    InvalidConfig(String),
    #[error(
        "non-finite loss at epoch {epoch}, batch {batch} (parameter norm {params_norm:.3e}); aborting run"
    )]
    NanLoss { epoch: usize, batch: usize, params_norm: f64 },
}
