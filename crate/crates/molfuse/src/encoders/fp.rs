//! Fingerprint encoders.
//!
//! The attention variant treats each bit position as a feature field: a 2-row
//! value embedding plus a fixed sinusoidal position table feed one multi-head
//! self-attention layer (softmax(QKᵀ/√d_h) per head, heads concatenated),
//! followed by sum pooling over positions and a linear map to the shared
//! embedding width. The ablation variant is a plain two-layer MLP on the raw
//! bit vector.

use super::{shape_err, EncoderError, ModelConfig};
use crate::featurize::MolViews;
use crate::nn::{linear, mlp2, Bound, Graph, Var};
use ndarray::Array2;

/// Sinusoidal position table: P[p, 2i] = sin(p / 10000^(2i/d)),
/// P[p, 2i+1] = cos(p / 10000^(2i/d)).
pub fn sinusoidal_positions(len: usize, d: usize) -> Array2<f64> {
    let mut p = Array2::zeros((len, d));
    for pos in 0..len {
        for i in 0..d.div_ceil(2) {
            let angle = pos as f64 / 10000f64.powf(2.0 * i as f64 / d as f64);
            p[[pos, 2 * i]] = angle.sin();
            if 2 * i + 1 < d {
                p[[pos, 2 * i + 1]] = angle.cos();
            }
        }
    }
    p
}

pub fn fp_attention_forward(
    g: &mut Graph,
    bound: &Bound,
    cfg: &ModelConfig,
    views: &MolViews,
) -> Result<Var, EncoderError> {
    let f = views.fingerprint.nbits();
    if f != cfg.fp_bits {
        return Err(shape_err("fp", format!("fingerprint has {f} bits, config wants {}", cfg.fp_bits)));
    }
    let vals: Vec<usize> = (0..f).map(|i| usize::from(views.fingerprint.get(i))).collect();
    let x0 = g.gather_rows(bound.var("fp.val_embed"), vals);
    let pos = sinusoidal_positions(f, cfg.fp_embed_dim);
    let x = g.add_const(x0, &pos);

    let dh = cfg.fp_embed_dim / cfg.fp_heads;
    let scale = 1.0 / (dh as f64).sqrt();
    let mut heads = Vec::with_capacity(cfg.fp_heads);
    for hd in 0..cfg.fp_heads {
        let q = g.matmul(x, bound.var(&format!("fp.head{hd}.wq")), false, false);
        let k = g.matmul(x, bound.var(&format!("fp.head{hd}.wk")), false, false);
        let v = g.matmul(x, bound.var(&format!("fp.head{hd}.wv")), false, false);
        let s = g.matmul(q, k, false, true);
        let s = g.scale(s, scale);
        let a = g.softmax_rows(s);
        heads.push(g.matmul(a, v, false, false));
    }
    let z = g.concat_cols(heads);
    let pooled = g.sum_axis0(z);
    Ok(linear(g, pooled, bound.var("fp.out.w"), bound.var("fp.out.b")))
}

/// Ablation variant: two-layer MLP straight from the raw bit vector.
pub fn fp_mlp_forward(
    g: &mut Graph,
    bound: &Bound,
    cfg: &ModelConfig,
    views: &MolViews,
) -> Result<Var, EncoderError> {
    let f = views.fingerprint.nbits();
    if f != cfg.fp_bits {
        return Err(shape_err("fp", format!("fingerprint has {f} bits, config wants {}", cfg.fp_bits)));
    }
    let bits = crate::nn::row(&views.fingerprint.to_f64_vec());
    let x = g.constant(bits);
    Ok(mlp2(
        g,
        x,
        bound.var("fp.mlp.w1"),
        bound.var("fp.mlp.b1"),
        bound.var("fp.mlp.w2"),
        bound.var("fp.mlp.b2"),
    ))
}
