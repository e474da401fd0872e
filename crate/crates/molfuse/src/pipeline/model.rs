//! Assembles encoders, fusion, and heads into batch computations.
//!
//! The training path puts a whole batch on one tape; the evaluation path
//! computes per-molecule view embeddings with every parameter bound constant,
//! then fuses with evaluation-time attention weights computed over the full
//! set being evaluated (so predictions are independent of batch composition).

use super::PipelineError;
use crate::encoders::{
    fp_attention_forward, fp_mlp_forward, gin_forward, schnet_forward, sm_forward, FpEncoderKind,
    ModelConfig, View,
};
use crate::featurize::MolViews;
use crate::fusion::{self, FusionMode};
use crate::nn::{Bound, Graph, ParamSet, Var};
use rand_chacha::ChaCha8Rng;
use std::collections::BTreeMap;

/// All parameter groups, for binding everything constant at evaluation time.
pub const ALL_GROUPS: [&str; 8] = ["gin", "schnet", "fp", "sm", "sm_head", "fusion", "critic", "head"];

/// Initialize the full parameter set (all encoders + fusion + critic).
pub fn init_model_params(cfg: &ModelConfig, seed: u64) -> ParamSet {
    let mut ps = ParamSet::new();
    crate::encoders::init_encoder_params(cfg, seed, &mut ps);
    fusion::init_params(cfg.dim, seed, &mut ps);
    crate::objective::init_params(cfg.dim, cfg.critic_hidden, seed, &mut ps);
    ps
}

/// Clone of `views` with positions replaced by one sampled conformer.
pub fn with_positions(views: &MolViews, positions: &[[f64; 3]]) -> MolViews {
    let mut v = views.clone();
    v.positions = Some(positions.to_vec());
    v
}

fn view_forward(
    g: &mut Graph,
    bound: &Bound,
    cfg: &ModelConfig,
    view: View,
    views: &MolViews,
    train_rng: Option<&mut ChaCha8Rng>,
) -> Result<Var, PipelineError> {
    let z = match view {
        View::TwoD => gin_forward(g, bound, cfg, views, train_rng)?,
        View::ThreeD => schnet_forward(g, bound, cfg, views, train_rng)?,
        View::Fp => match cfg.fp_encoder {
            FpEncoderKind::Attention => fp_attention_forward(g, bound, cfg, views)?,
            FpEncoderKind::Mlp => fp_mlp_forward(g, bound, cfg, views)?,
        },
        View::Sm => sm_forward(g, bound, cfg, &views.tokens, 0, train_rng)?,
    };
    Ok(z)
}

pub struct BatchOutput {
    /// One B×D matrix per enabled view, in `views` order.
    pub view_zs: Vec<Var>,
    /// Attention weights (1×M) when the mode uses them.
    pub alpha: Option<Var>,
    /// Fused B×D embeddings.
    pub fused: Var,
}

/// Forward a batch through the enabled views and the fusion stage.
pub fn batch_forward(
    g: &mut Graph,
    bound: &Bound,
    cfg: &ModelConfig,
    enabled: &[View],
    mols: &[MolViews],
    mode: FusionMode,
    mut train_rng: Option<&mut ChaCha8Rng>,
) -> Result<BatchOutput, PipelineError> {
    assert!(!enabled.is_empty(), "at least one view must be enabled");
    assert!(!mols.is_empty(), "empty batch");
    let mut view_zs = Vec::with_capacity(enabled.len());
    for &view in enabled {
        let mut rows = Vec::with_capacity(mols.len());
        for m in mols {
            rows.push(view_forward(g, bound, cfg, view, m, train_rng.as_deref_mut())?);
        }
        view_zs.push(g.concat_rows(rows));
    }
    let (alpha, fused) = match mode {
        FusionMode::Attention | FusionMode::Frozen => {
            let alpha = fusion::attention_weights_graph(g, bound, &view_zs);
            let fused = fusion::aggregate_graph(g, &view_zs, alpha);
            (Some(alpha), fused)
        }
        FusionMode::Max | FusionMode::Mean => (None, fusion::pool_graph(g, &view_zs, mode)),
    };
    Ok(BatchOutput { view_zs, alpha, fused })
}

/// Per-view embeddings of one molecule with all parameters constant.
pub fn embed_molecule(
    ps: &ParamSet,
    cfg: &ModelConfig,
    enabled: &[View],
    views: &MolViews,
) -> Result<BTreeMap<View, Vec<f64>>, PipelineError> {
    let mut g = Graph::new();
    let bound = Bound::new(&mut g, ps, &ALL_GROUPS);
    let mut out = BTreeMap::new();
    for &view in enabled {
        let z = view_forward(&mut g, &bound, cfg, view, views, None)?;
        out.insert(view, g.value(z).iter().copied().collect());
    }
    Ok(out)
}

/// Evaluation-time fusion weights over a full set of molecules.
pub fn eval_alpha(
    ps: &ParamSet,
    enabled: &[View],
    embeddings: &[BTreeMap<View, Vec<f64>>],
) -> Result<Vec<f64>, PipelineError> {
    let per_view: Vec<Vec<Vec<f64>>> = enabled
        .iter()
        .map(|v| embeddings.iter().map(|e| e[v].clone()).collect())
        .collect();
    Ok(fusion::attention_weights(&per_view, ps)?)
}

pub struct Predictions {
    /// Fusion weights used (None for max pooling-style modes without weights).
    pub alpha: Option<Vec<f64>>,
    /// Per molecule, per task: raw head outputs (pre-sigmoid).
    pub logits: Vec<Vec<f64>>,
    /// Per molecule fused embeddings.
    pub fused: Vec<Vec<f64>>,
}

/// Full evaluation path: embed every molecule, fuse, apply the linear head.
pub fn predict(
    ps: &ParamSet,
    cfg: &ModelConfig,
    enabled: &[View],
    mode: FusionMode,
    mols: &[&MolViews],
) -> Result<Predictions, PipelineError> {
    let mut embeddings = Vec::with_capacity(mols.len());
    for m in mols {
        embeddings.push(embed_molecule(ps, cfg, enabled, m)?);
    }
    let alpha = match mode {
        FusionMode::Attention | FusionMode::Frozen => Some(eval_alpha(ps, enabled, &embeddings)?),
        FusionMode::Mean => Some(vec![1.0 / enabled.len() as f64; enabled.len()]),
        FusionMode::Max => None,
    };
    let fused: Vec<Vec<f64>> = embeddings
        .iter()
        .map(|e| {
            let per_view: Vec<Vec<f64>> = enabled.iter().map(|v| e[v].clone()).collect();
            match (&alpha, mode) {
                (Some(a), _) => fusion::aggregate(&per_view, a),
                (None, FusionMode::Max) => fusion::pool_ablation(&per_view, FusionMode::Max),
                _ => unreachable!(),
            }
        })
        .collect();

    let logits = if ps.contains("head.w") {
        let w = ps.get("head.w");
        let b = ps.get("head.b");
        fused
            .iter()
            .map(|z| {
                (0..w.ncols())
                    .map(|t| {
                        let mut s = b[[0, t]];
                        for (d, &v) in z.iter().enumerate() {
                            s += v * w[[d, t]];
                        }
                        s
                    })
                    .collect()
            })
            .collect()
    } else {
        Vec::new()
    };
    Ok(Predictions { alpha, logits, fused })
}

pub fn sigmoid(x: f64) -> f64 {
    1.0 / (1.0 + (-x).exp())
}
