//! Attention-weighted aggregation of view embeddings.
//!
//! One weight per view, shared by the whole batch:
//! w^m = (1/|B|) Σ_i qᵀ tanh(W ẑ_i^m + b) with ẑ the ℓ₂-normalized embedding,
//! α = softmax(w). The fused embedding is z_i = Σ_m α^m z_i^m over the raw
//! (un-normalized) view vectors. Max/mean poolers replace the attention
//! network in ablations; frozen mode keeps q, W, b fixed while still
//! recomputing α per batch.

use crate::encoders::View;
use crate::nn::{glorot, zeros_row, Bound, Graph, ParamSet, Var};
use crate::util::order_invariant_sum;
use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum FusionMode {
    Attention,
    Max,
    Mean,
    /// Attention with q, W, b frozen at their checkpoint values.
    Frozen,
}

impl FusionMode {
    pub fn parse(s: &str) -> Option<FusionMode> {
        match s {
            "attention" => Some(FusionMode::Attention),
            "max" => Some(FusionMode::Max),
            "mean" => Some(FusionMode::Mean),
            "frozen" => Some(FusionMode::Frozen),
            _ => None,
        }
    }

    pub fn label(self) -> &'static str {
        match self {
            FusionMode::Attention => "attention",
            FusionMode::Max => "max",
            FusionMode::Mean => "mean",
            FusionMode::Frozen => "frozen",
        }
    }
}

#[derive(Debug, Error, PartialEq)]
pub enum FusionError {
    #[error("empty batch")]
    EmptyBatch,
    #[error("checkpoint is missing fusion parameters")]
    MissingCheckpoint,
}

/// Aggregation state. The trainable tensors live in the shared parameter set
/// under `fusion.q` (1×D), `fusion.w` (D×D), `fusion.b` (1×D); this struct
/// carries the mode, the freeze flag, and the evaluation-time weights.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FusionState {
    pub mode: FusionMode,
    pub frozen: bool,
    /// Per-view weights computed over a full evaluation set, so per-molecule
    /// predictions do not depend on batch composition.
    pub cached_alpha: Option<Vec<f64>>,
}

impl FusionState {
    pub fn new(mode: FusionMode) -> Self {
        FusionState { mode, frozen: mode == FusionMode::Frozen, cached_alpha: None }
    }

    /// Enter frozen mode against a checkpointed parameter set; fails when the
    /// checkpoint carries no fusion parameters.
    pub fn set_frozen(mut self, checkpoint: &ParamSet) -> Result<Self, FusionError> {
        for name in ["fusion.q", "fusion.w", "fusion.b"] {
            if !checkpoint.contains(name) {
                return Err(FusionError::MissingCheckpoint);
            }
        }
        self.mode = FusionMode::Frozen;
        self.frozen = true;
        Ok(self)
    }
}

pub fn init_params(dim: usize, seed: u64, ps: &mut ParamSet) {
    ps.insert("fusion.q", glorot(seed, "fusion.q", 1, dim));
    ps.insert("fusion.w", glorot(seed, "fusion.w", dim, dim));
    ps.insert("fusion.b", zeros_row(dim));
}

/// Attention weights over per-view batch matrices, on the tape.
/// `zs[m]` is the B×D embedding matrix of view m; returns α as a 1×M node.
pub fn attention_weights_graph(g: &mut Graph, bound: &Bound, zs: &[Var]) -> Var {
    let mut logits = Vec::with_capacity(zs.len());
    for &z in zs {
        let u = g.l2_normalize_rows(z);
        let t = g.matmul(u, bound.var("fusion.w"), false, true);
        let t = g.add_row(t, bound.var("fusion.b"));
        let t = g.tanh(t);
        let s = g.matmul(t, bound.var("fusion.q"), false, true);
        logits.push(g.mean_all(s));
    }
    let w = g.concat_cols(logits);
    g.softmax_rows(w)
}

/// Fused batch embedding Σ_m α^m Z_m from raw view matrices.
pub fn aggregate_graph(g: &mut Graph, zs: &[Var], alpha: Var) -> Var {
    let mut fused: Option<Var> = None;
    for (m, &z) in zs.iter().enumerate() {
        let am = g.gather_entries(alpha, vec![0], vec![m]);
        let part = g.scale_by_scalar(z, am);
        fused = Some(match fused {
            Some(acc) => g.add(acc, part),
            None => part,
        });
    }
    fused.expect("at least one view")
}

/// Max/mean pooling over view matrices (ablation modes), on the tape.
pub fn pool_graph(g: &mut Graph, zs: &[Var], mode: FusionMode) -> Var {
    match mode {
        FusionMode::Max => {
            let mut acc = zs[0];
            for &z in &zs[1..] {
                acc = g.max_elem(acc, z);
            }
            acc
        }
        FusionMode::Mean => {
            let mut acc = zs[0];
            for &z in &zs[1..] {
                acc = g.add(acc, z);
            }
            g.scale(acc, 1.0 / zs.len() as f64)
        }
        _ => panic!("pool_graph expects max or mean"),
    }
}

/// Evaluation-path attention weights: same formula as the graph path, summed
/// in a bit-reproducible order so that reordering molecules in the batch
/// leaves α unchanged exactly.
pub fn attention_weights(
    per_view: &[Vec<Vec<f64>>],
    ps: &ParamSet,
) -> Result<Vec<f64>, FusionError> {
    if per_view.iter().any(Vec::is_empty) {
        return Err(FusionError::EmptyBatch);
    }
    let q = ps.get("fusion.q");
    let w = ps.get("fusion.w");
    let b = ps.get("fusion.b");
    let d = q.ncols();
    let mut logits = Vec::with_capacity(per_view.len());
    for batch in per_view {
        let contributions: Vec<f64> = batch
            .iter()
            .map(|z| {
                let norm = z.iter().map(|v| v * v).sum::<f64>().sqrt();
                let zn: Vec<f64> = if norm > 0.0 {
                    z.iter().map(|v| v / norm).collect()
                } else {
                    z.clone()
                };
                let mut score = 0.0;
                for r in 0..d {
                    let mut t = b[[0, r]];
                    for c in 0..d {
                        t += w[[r, c]] * zn[c];
                    }
                    score += q[[0, r]] * t.tanh();
                }
                score
            })
            .collect();
        logits.push(order_invariant_sum(&contributions) / contributions.len() as f64);
    }
    // stable softmax
    let max = logits.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let exps: Vec<f64> = logits.iter().map(|&v| (v - max).exp()).collect();
    let sum: f64 = exps.iter().sum();
    Ok(exps.into_iter().map(|e| e / sum).collect())
}

/// z = Σ_m α^m z^m on plain vectors.
pub fn aggregate(views: &[Vec<f64>], alpha: &[f64]) -> Vec<f64> {
    assert_eq!(views.len(), alpha.len());
    let d = views[0].len();
    let mut out = vec![0.0; d];
    for (z, &a) in views.iter().zip(alpha) {
        for (o, &v) in out.iter_mut().zip(z) {
            *o += a * v;
        }
    }
    out
}

/// Coordinate-wise max or arithmetic mean of the view vectors.
pub fn pool_ablation(views: &[Vec<f64>], mode: FusionMode) -> Vec<f64> {
    let d = views[0].len();
    match mode {
        FusionMode::Max => (0..d)
            .map(|i| views.iter().map(|v| v[i]).fold(f64::NEG_INFINITY, f64::max))
            .collect(),
        FusionMode::Mean => (0..d)
            .map(|i| views.iter().map(|v| v[i]).sum::<f64>() / views.len() as f64)
            .collect(),
        _ => panic!("pool_ablation expects max or mean"),
    }
}

/// Write per-view weights as a two-column CSV (`view,weight`).
pub fn alpha_csv(views: &[View], alpha: &[f64]) -> String {
    let mut out = String::from("view,weight\n");
    for (v, a) in views.iter().zip(alpha) {
        out.push_str(&format!("{},{}\n", v.label(), a));
    }
    out
}
