//! Multiview contrastive objective.
//!
//! Critic: θ(x, y) = cosine similarity of g(x) and g(y), with g a shared
//! two-layer ReLU MLP. For each molecule the four view embeddings anchor
//! against the aggregated embedding as the positive; the other aggregated
//! embeddings in the batch are the negatives:
//!
//! ```text
//! L = (1/|B|) Σ_i (1/|M|) Σ_m −log  exp(θ(z_i^m, z_i)/τ) / Σ_j exp(θ(z_i^m, z_j)/τ)
//! ```
//!
//! Log-sum-exp is max-shifted, so any τ ≥ 0.01 with similarities in [−1, 1]
//! stays finite.

use crate::nn::{glorot, mlp2, zeros_row, Bound, Graph, ParamSet, Var};
use thiserror::Error;

#[derive(Debug, Error, PartialEq)]
pub enum ObjectiveError {
    #[error("empty batch")]
    EmptyBatch,
    #[error("critic projection has zero norm (row {row})")]
    ZeroProjection { row: usize },
}

/// Critic MLP parameters: `critic.w1` (D×H), `critic.b1`, `critic.w2` (H×D),
/// `critic.b2`.
pub fn init_params(dim: usize, hidden: usize, seed: u64, ps: &mut ParamSet) {
    ps.insert("critic.w1", glorot(seed, "critic.w1", dim, hidden));
    ps.insert("critic.b1", zeros_row(hidden));
    ps.insert("critic.w2", glorot(seed, "critic.w2", hidden, dim));
    ps.insert("critic.b2", zeros_row(dim));
}

/// g(X) row-wise on the tape.
pub fn critic_project(g: &mut Graph, bound: &Bound, x: Var) -> Var {
    mlp2(
        g,
        x,
        bound.var("critic.w1"),
        bound.var("critic.b1"),
        bound.var("critic.w2"),
        bound.var("critic.b2"),
    )
}

fn check_nonzero_rows(g: &Graph, v: Var) -> Result<(), ObjectiveError> {
    for (row, r) in g.value(v).rows().into_iter().enumerate() {
        if r.iter().all(|&x| x == 0.0) {
            return Err(ObjectiveError::ZeroProjection { row });
        }
    }
    Ok(())
}

/// Contrastive loss over one batch, on the tape.
///
/// `view_zs[m]` is the B×D matrix of view-m embeddings and `fused` the B×D
/// aggregated embeddings. The anchors are the view embeddings; the softmax
/// denominator runs over every aggregated embedding in the batch, including
/// the positive itself.
pub fn infonce_loss(
    g: &mut Graph,
    bound: &Bound,
    view_zs: &[Var],
    fused: Var,
    tau: f64,
) -> Result<Var, ObjectiveError> {
    assert!(tau > 0.0, "temperature must be positive");
    let b = g.value(fused).nrows();
    if b == 0 || view_zs.is_empty() {
        return Err(ObjectiveError::EmptyBatch);
    }
    let gp = critic_project(g, bound, fused);
    check_nonzero_rows(g, gp)?;
    let pos = g.l2_normalize_rows(gp);

    let mut anchor_losses = Vec::with_capacity(view_zs.len());
    for &z in view_zs {
        let ga = critic_project(g, bound, z);
        check_nonzero_rows(g, ga)?;
        let anc = g.l2_normalize_rows(ga);
        let sims = g.matmul(anc, pos, false, true); // [B,B] of θ values
        let logits = g.scale(sims, 1.0 / tau);
        let ls = g.log_softmax_rows(logits);
        let diag = g.gather_entries(ls, (0..b).collect(), (0..b).collect());
        let mean = g.mean_all(diag);
        anchor_losses.push(g.scale(mean, -1.0));
    }
    let mut total = anchor_losses[0];
    for &l in &anchor_losses[1..] {
        total = g.add(total, l);
    }
    Ok(g.scale(total, 1.0 / view_zs.len() as f64))
}

/// Critic similarity on plain vectors (evaluation path).
pub fn critic_eval(ps: &ParamSet, x: &[f64], y: &[f64]) -> Result<f64, ObjectiveError> {
    let project = |v: &[f64]| -> Vec<f64> {
        let w1 = ps.get("critic.w1");
        let b1 = ps.get("critic.b1");
        let w2 = ps.get("critic.w2");
        let b2 = ps.get("critic.b2");
        let hidden: Vec<f64> = (0..w1.ncols())
            .map(|h| {
                let mut s = b1[[0, h]];
                for (c, &vc) in v.iter().enumerate() {
                    s += vc * w1[[c, h]];
                }
                s.max(0.0)
            })
            .collect();
        (0..w2.ncols())
            .map(|o| {
                let mut s = b2[[0, o]];
                for (h, &hv) in hidden.iter().enumerate() {
                    s += hv * w2[[h, o]];
                }
                s
            })
            .collect()
    };
    let gx = project(x);
    let gy = project(y);
    let sx: f64 = gx.iter().map(|v| v * v).sum();
    let sy: f64 = gy.iter().map(|v| v * v).sum();
    if sx == 0.0 {
        return Err(ObjectiveError::ZeroProjection { row: 0 });
    }
    if sy == 0.0 {
        return Err(ObjectiveError::ZeroProjection { row: 1 });
    }
    let dot: f64 = gx.iter().zip(&gy).map(|(a, b)| a * b).sum();
    // sqrt(sx·sy) keeps θ(x, x) at exactly 1.0 (sqrt(s·s) == s in IEEE754)
    Ok(dot / (sx * sy).sqrt())
}

/// Test fixtures shared with the acceptance suite.
#[doc(hidden)]
pub mod test_support {
    use super::*;

    /// Critic parameters realizing g(x) = x exactly, so θ is the plain cosine:
    /// W1 = [I | −I], W2 = [I; −I] gives relu(x) − relu(−x) = x.
    pub fn identity_critic_params(dim: usize) -> ParamSet {
        let mut w1 = ndarray::Array2::zeros((dim, 2 * dim));
        let mut w2 = ndarray::Array2::zeros((2 * dim, dim));
        for i in 0..dim {
            w1[[i, i]] = 1.0;
            w1[[i, dim + i]] = -1.0;
            w2[[i, i]] = 1.0;
            w2[[dim + i, i]] = -1.0;
        }
        let mut ps = ParamSet::new();
        ps.insert("critic.w1", w1);
        ps.insert("critic.b1", zeros_row(2 * dim));
        ps.insert("critic.w2", w2);
        ps.insert("critic.b2", zeros_row(dim));
        ps
    }
}
