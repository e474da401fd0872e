//! Graph isomorphism message passing over the 2D view.
//!
//! Layer rule: h_i ← f_atom(h_i + Σ_{j∈N(i)} (h_j + f_bond(e_ij))), where
//! f_atom is a two-layer ReLU MLP and f_bond embeds the discrete bond type and
//! direction. Node states start from summed atom-type and chirality-tag
//! embeddings; the molecule embedding is the mean over final node states.

use super::{maybe_dropout, shape_err, EncoderError, ModelConfig};
use crate::featurize::{MolViews, N_ATOM_TYPES, N_BOND_DIRS, N_BOND_TYPES, N_CHIRALITY_TAGS};
use crate::nn::{linear, Bound, Graph, Var};
use rand_chacha::ChaCha8Rng;

pub fn gin_forward(
    g: &mut Graph,
    bound: &Bound,
    cfg: &ModelConfig,
    views: &MolViews,
    mut train_rng: Option<&mut ChaCha8Rng>,
) -> Result<Var, EncoderError> {
    let n = views.n_atoms;
    if n == 0 {
        return Err(shape_err("gin", "empty graph"));
    }
    if views.atom_feats.len() != n {
        return Err(shape_err("gin", format!("{} atom feature rows for {} atoms", views.atom_feats.len(), n)));
    }
    let mut types = Vec::with_capacity(n);
    let mut chirs = Vec::with_capacity(n);
    for &[t, c] in &views.atom_feats {
        if t >= N_ATOM_TYPES || c >= N_CHIRALITY_TAGS {
            return Err(shape_err("gin", format!("atom feature ({t},{c}) out of range")));
        }
        types.push(t);
        chirs.push(c);
    }
    let mut src = Vec::with_capacity(views.bonds.len() * 2);
    let mut dst = Vec::with_capacity(views.bonds.len() * 2);
    let mut btypes = Vec::with_capacity(views.bonds.len() * 2);
    let mut bdirs = Vec::with_capacity(views.bonds.len() * 2);
    for b in &views.bonds {
        if b.a >= n || b.b >= n || b.a == b.b {
            return Err(shape_err("gin", format!("bond ({}, {}) out of range", b.a, b.b)));
        }
        if b.type_idx >= N_BOND_TYPES || b.dir_idx >= N_BOND_DIRS {
            return Err(shape_err("gin", "bond feature out of range"));
        }
        // both directions of the undirected bond
        src.push(b.a);
        dst.push(b.b);
        src.push(b.b);
        dst.push(b.a);
        btypes.extend([b.type_idx, b.type_idx]);
        bdirs.extend([b.dir_idx, b.dir_idx]);
    }

    let te = g.gather_rows(bound.var("gin.atom_embed"), types);
    let ce = g.gather_rows(bound.var("gin.chir_embed"), chirs);
    let mut h = g.add(te, ce);

    for k in 0..cfg.gin_layers {
        let pre = if src.is_empty() {
            h
        } else {
            let bt = g.gather_rows(bound.var(&format!("gin.layer{k}.bond_type")), btypes.clone());
            let bd = g.gather_rows(bound.var(&format!("gin.layer{k}.bond_dir")), bdirs.clone());
            let bemb = g.add(bt, bd);
            let hj = g.gather_rows(h, src.clone());
            let msg = g.add(hj, bemb);
            let agg = g.segment_sum(msg, dst.clone(), n);
            g.add(h, agg)
        };
        let hid = linear(
            g,
            pre,
            bound.var(&format!("gin.layer{k}.w1")),
            bound.var(&format!("gin.layer{k}.b1")),
        );
        let hid = g.relu(hid);
        let hid = maybe_dropout(g, hid, cfg.dropout.gin, train_rng.as_deref_mut());
        h = linear(
            g,
            hid,
            bound.var(&format!("gin.layer{k}.w2")),
            bound.var(&format!("gin.layer{k}.b2")),
        );
    }
    Ok(g.mean_axis0(h))
}
