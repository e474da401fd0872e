//! Contrastive pretraining loop: featurized molecules → four encoders →
//! attention fusion → InfoNCE → Adam, with per-encoder learning rates.
//!
//! The token backbone is masked-token pretrained first (unless disabled),
//! then frozen for the contrastive stage when the config says so. When a
//! molecule ships several conformers, each epoch samples one uniformly. A
//! non-finite loss aborts the run with diagnostics instead of training on.

use super::model::{batch_forward, with_positions};
use super::PipelineError;
use crate::config::RunConfig;
use crate::dataset::Molecule;
use crate::encoders::{mlm_pretrain, View};
use crate::fusion::FusionMode;
use crate::nn::{Adam, Bound, Graph, ParamSet};
use crate::objective::infonce_loss;
use crate::util::seeded_rng;
use rand::seq::SliceRandom;
use rand::Rng;
use std::io::Write;
use std::time::Instant;

pub struct PretrainOutcome {
    /// Mean contrastive loss per epoch.
    pub loss_trace: Vec<f64>,
    /// Mean masked-token loss per epoch of the backbone stage.
    pub mlm_trace: Vec<f64>,
    /// Full-dataset fusion weights at the end (attention modes only).
    pub final_alpha: Option<Vec<f64>>,
}

/// Run pretraining in place on `ps`. `log` receives one CSV line per epoch:
/// `epoch,loss,lr,wall_ms`.
pub fn pretrain(
    cfg: &RunConfig,
    data: &[Molecule],
    ps: &mut ParamSet,
    mut log: Option<&mut dyn Write>,
) -> Result<PretrainOutcome, PipelineError> {
    if cfg.fusion_mode == FusionMode::Frozen {
        return Err(PipelineError::InvalidConfig(
            "pretraining cannot use frozen fusion; freeze applies to fine-tuning".into(),
        ));
    }
    if data.is_empty() {
        return Err(PipelineError::InvalidConfig("pretraining dataset is empty".into()));
    }
    let need_3d = cfg.views.contains(&View::ThreeD);
    if need_3d {
        for m in data {
            if m.views.positions.is_none() {
                return Err(PipelineError::InvalidConfig(format!(
                    "molecule row {} has no conformer but the 3d view is enabled",
                    m.row
                )));
            }
        }
    }

    // stage 1: masked-token pretraining of the string backbone
    let mlm_trace = if cfg.views.contains(&View::Sm) && cfg.mlm_epochs > 0 {
        let corpus: Vec<Vec<u32>> = data.iter().map(|m| m.views.tokens.clone()).collect();
        mlm_pretrain(
            ps,
            &cfg.model,
            &corpus,
            cfg.mlm_epochs,
            cfg.mlm_batch_size,
            cfg.mlm_lr,
            cfg.mask_prob,
            cfg.seed,
        )?
        .loss_trace
    } else {
        Vec::new()
    };

    // stage 2: contrastive training over all enabled views
    let mut frozen: Vec<&str> = vec!["head"];
    if cfg.model.sm_frozen {
        frozen.push("sm");
    }
    let lrs = cfg.lr_table();
    let mut adam = Adam::new();
    let mut trace = Vec::with_capacity(cfg.epochs);

    for epoch in 0..cfg.epochs {
        let started = Instant::now();
        let mut order: Vec<usize> = (0..data.len()).collect();
        let mut shuffle_rng = seeded_rng(cfg.seed, &format!("pretrain.shuffle.{epoch}"));
        order.shuffle(&mut shuffle_rng);
        // conformer choice is drawn per molecule index so it does not depend
        // on the shuffle
        let mut conf_rng = seeded_rng(cfg.seed, &format!("pretrain.conformer.{epoch}"));
        let picks: Vec<usize> = data
            .iter()
            .map(|m| if m.conformers.len() > 1 { conf_rng.random_range(0..m.conformers.len()) } else { 0 })
            .collect();

        let mut batch_losses = Vec::new();
        for (batch_id, chunk) in order.chunks(cfg.batch_size).enumerate() {
            let mols: Vec<_> = chunk
                .iter()
                .map(|&i| {
                    let m = &data[i];
                    if need_3d && m.conformers.len() > 1 {
                        with_positions(&m.views, &m.conformers[picks[i]])
                    } else {
                        m.views.clone()
                    }
                })
                .collect();
            let mut g = Graph::new();
            let bound = Bound::new(&mut g, ps, &frozen);
            let mut drop_rng = seeded_rng(cfg.seed, &format!("pretrain.dropout.{epoch}.{batch_id}"));
            let out = batch_forward(
                &mut g,
                &bound,
                &cfg.model,
                &cfg.views,
                &mols,
                cfg.fusion_mode,
                Some(&mut drop_rng),
            )?;
            let loss = infonce_loss(&mut g, &bound, &out.view_zs, out.fused, cfg.tau)?;
            let value = g.scalar_value(loss);
            if !value.is_finite() {
                return Err(PipelineError::NanLoss { epoch, batch: batch_id, params_norm: ps.l2_norm() });
            }
            g.backward(loss);
            let grads = bound.gradients(&g, ps);
            adam.step(ps, &grads, &lrs);
            batch_losses.push(value);
        }
        let mean = batch_losses.iter().sum::<f64>() / batch_losses.len() as f64;
        trace.push(mean);
        if let Some(log) = log.as_deref_mut() {
            let wall = started.elapsed().as_millis();
            writeln!(log, "{epoch},{mean},{},{wall}", cfg.lr_gin)
                .map_err(|e| PipelineError::InvalidConfig(format!("cannot write training log: {e}")))?;
        }
    }

    // evaluation-time α over the whole pretraining set
    let final_alpha = match cfg.fusion_mode {
        FusionMode::Attention => {
            let mut embeddings = Vec::with_capacity(data.len());
            for m in data {
                embeddings.push(super::model::embed_molecule(ps, &cfg.model, &cfg.views, &m.views)?);
            }
            Some(super::model::eval_alpha(ps, &cfg.views, &embeddings)?)
        }
        _ => None,
    };

    Ok(PretrainOutcome { loss_trace: trace, mlm_trace, final_alpha })
}
