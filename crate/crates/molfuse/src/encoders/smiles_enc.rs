//! Token-sequence encoder: a small post-norm transformer whose [CLS] output
//! feeds a trainable projection head, plus masked-token pretraining.
//!
//! The backbone stands in for a corpus-scale pretrained language model; after
//! masked-token training it is normally frozen, and only the projection head
//! continues to learn. Padding positions are masked out of every attention
//! row, so appended pads leave the [CLS] embedding untouched.

use super::{maybe_dropout, shape_err, EncoderError, ModelConfig};
use crate::featurize::{CLS_ID, MASK_ID, PAD_ID};
use crate::nn::{linear, mlp2, Adam, Bound, Graph, LrTable, ParamSet, Var};
use crate::util::seeded_rng;
use ndarray::Array2;
use rand::seq::SliceRandom;
use rand::Rng;
use rand_chacha::ChaCha8Rng;

const NEG_INF: f64 = -1e30;

/// Transformer backbone over `tokens` followed by `n_pad` padding ids.
/// Returns the full hidden-state matrix [S, d_s].
pub fn sm_backbone(
    g: &mut Graph,
    bound: &Bound,
    cfg: &ModelConfig,
    tokens: &[u32],
    n_pad: usize,
    mut train_rng: Option<&mut ChaCha8Rng>,
) -> Result<Var, EncoderError> {
    if tokens.is_empty() {
        return Err(shape_err("sm", "empty token sequence"));
    }
    let real = tokens.len();
    let s = real + n_pad;
    if s > cfg.max_seq_len {
        return Err(EncoderError::SequenceTooLong { len: s, max: cfg.max_seq_len });
    }
    let mut ids = Vec::with_capacity(s);
    for &t in tokens {
        if t as usize >= cfg.vocab_size {
            return Err(shape_err("sm", format!("token id {t} outside vocab of {}", cfg.vocab_size)));
        }
        ids.push(t as usize);
    }
    ids.resize(s, PAD_ID as usize);

    let te = g.gather_rows(bound.var("sm.tok_embed"), ids);
    let pe = g.gather_rows(bound.var("sm.pos_embed"), (0..s).collect());
    let mut x = g.add(te, pe);

    // keys at padded positions are unreachable from every query
    let mask = Array2::from_shape_fn((s, s), |(_, j)| if j >= real { NEG_INF } else { 0.0 });
    let dh = cfg.sm_hidden / cfg.sm_heads;
    let scale = 1.0 / (dh as f64).sqrt();

    for l in 0..cfg.sm_layers {
        let mut heads = Vec::with_capacity(cfg.sm_heads);
        for hd in 0..cfg.sm_heads {
            let q = g.matmul(x, bound.var(&format!("sm.layer{l}.head{hd}.wq")), false, false);
            let k = g.matmul(x, bound.var(&format!("sm.layer{l}.head{hd}.wk")), false, false);
            let v = g.matmul(x, bound.var(&format!("sm.layer{l}.head{hd}.wv")), false, false);
            let sc = g.matmul(q, k, false, true);
            let sc = g.scale(sc, scale);
            let sc = g.add_const(sc, &mask);
            let a = g.softmax_rows(sc);
            heads.push(g.matmul(a, v, false, false));
        }
        let o = g.concat_cols(heads);
        let o = linear(
            g,
            o,
            bound.var(&format!("sm.layer{l}.attn_out.w")),
            bound.var(&format!("sm.layer{l}.attn_out.b")),
        );
        let xo = g.add(x, o);
        let ln = g.layer_norm_rows(xo, 1e-5);
        let ln = g.mul_row(ln, bound.var(&format!("sm.layer{l}.ln1.gamma")));
        x = g.add_row(ln, bound.var(&format!("sm.layer{l}.ln1.beta")));

        let f1 = linear(
            g,
            x,
            bound.var(&format!("sm.layer{l}.ffn.w1")),
            bound.var(&format!("sm.layer{l}.ffn.b1")),
        );
        let f1 = g.relu(f1);
        let f1 = maybe_dropout(g, f1, cfg.dropout.sm, train_rng.as_deref_mut());
        let f2 = linear(
            g,
            f1,
            bound.var(&format!("sm.layer{l}.ffn.w2")),
            bound.var(&format!("sm.layer{l}.ffn.b2")),
        );
        let xf = g.add(x, f2);
        let ln = g.layer_norm_rows(xf, 1e-5);
        let ln = g.mul_row(ln, bound.var(&format!("sm.layer{l}.ln2.gamma")));
        x = g.add_row(ln, bound.var(&format!("sm.layer{l}.ln2.beta")));
    }
    Ok(x)
}

/// View embedding: projection head applied to the [CLS] hidden state.
pub fn sm_forward(
    g: &mut Graph,
    bound: &Bound,
    cfg: &ModelConfig,
    tokens: &[u32],
    n_pad: usize,
    train_rng: Option<&mut ChaCha8Rng>,
) -> Result<Var, EncoderError> {
    let x = sm_backbone(g, bound, cfg, tokens, n_pad, train_rng)?;
    let cls = g.gather_rows(x, vec![0]);
    Ok(mlp2(
        g,
        cls,
        bound.var("sm_head.w1"),
        bound.var("sm_head.b1"),
        bound.var("sm_head.w2"),
        bound.var("sm_head.b2"),
    ))
}

/// Select each non-special token with probability `prob` and replace it with
/// the mask id. Returns the corrupted sequence and (position, original id)
/// pairs.
pub fn mask_tokens(tokens: &[u32], prob: f64, rng: &mut ChaCha8Rng) -> (Vec<u32>, Vec<(usize, u32)>) {
    let mut out = tokens.to_vec();
    let mut targets = Vec::new();
    for (i, t) in tokens.iter().enumerate() {
        if *t == CLS_ID || *t == PAD_ID {
            continue;
        }
        if rng.random_range(0.0..1.0) < prob {
            targets.push((i, *t));
            out[i] = MASK_ID;
        }
    }
    (out, targets)
}

/// Mean cross-entropy over all masked positions in the batch; `None` when the
/// batch has no masked positions.
pub fn mlm_batch_loss(
    g: &mut Graph,
    bound: &Bound,
    cfg: &ModelConfig,
    batch: &[(Vec<u32>, Vec<(usize, u32)>)],
) -> Result<Option<Var>, EncoderError> {
    let mut gathered = Vec::new();
    let mut targets = Vec::new();
    for (tokens, masked) in batch {
        if masked.is_empty() {
            continue;
        }
        let x = sm_backbone(g, bound, cfg, tokens, 0, None)?;
        let rows: Vec<usize> = masked.iter().map(|&(p, _)| p).collect();
        gathered.push(g.gather_rows(x, rows));
        targets.extend(masked.iter().map(|&(_, t)| t as usize));
    }
    if gathered.is_empty() {
        return Ok(None);
    }
    let hidden = g.concat_rows(gathered);
    let logits = linear(g, hidden, bound.var("sm.mlm.w"), bound.var("sm.mlm.b"));
    let ls = g.log_softmax_rows(logits);
    let rows: Vec<usize> = (0..targets.len()).collect();
    let picked = g.gather_entries(ls, rows, targets);
    let total = g.mean_all(picked);
    Ok(Some(g.scale(total, -1.0)))
}

pub struct MlmOutcome {
    /// Mean batch loss per epoch.
    pub loss_trace: Vec<f64>,
}

/// Masked-token pretraining of the backbone (`sm.*` group) in place.
#[allow(clippy::too_many_arguments)]
pub fn mlm_pretrain(
    ps: &mut ParamSet,
    cfg: &ModelConfig,
    corpus: &[Vec<u32>],
    epochs: usize,
    batch_size: usize,
    lr: f64,
    mask_prob: f64,
    seed: u64,
) -> Result<MlmOutcome, EncoderError> {
    assert!(batch_size > 0);
    let mut adam = Adam::new();
    let lrs = LrTable::uniform(lr);
    let mut trace = Vec::with_capacity(epochs);
    for epoch in 0..epochs {
        let mut order: Vec<usize> = (0..corpus.len()).collect();
        let mut shuffle_rng = seeded_rng(seed, &format!("mlm.shuffle.{epoch}"));
        order.shuffle(&mut shuffle_rng);
        let mut mask_rng = seeded_rng(seed, &format!("mlm.mask.{epoch}"));

        let mut losses = Vec::new();
        for chunk in order.chunks(batch_size) {
            let batch: Vec<(Vec<u32>, Vec<(usize, u32)>)> = chunk
                .iter()
                .map(|&i| mask_tokens(&corpus[i], mask_prob, &mut mask_rng))
                .collect();
            let mut g = Graph::new();
            // only the backbone trains here; the projection head and every
            // other group stay fixed
            let frozen: Vec<&str> = ps
                .names()
                .map(ParamSet::group_of)
                .filter(|g| *g != "sm")
                .collect::<std::collections::BTreeSet<_>>()
                .into_iter()
                .collect();
            let bound = Bound::new(&mut g, ps, &frozen);
            let Some(loss) = mlm_batch_loss(&mut g, &bound, cfg, &batch)? else {
                continue;
            };
            let value = g.scalar_value(loss);
            g.backward(loss);
            let grads = bound.gradients(&g, ps);
            adam.step(ps, &grads, &lrs);
            losses.push(value);
        }
        let mean = if losses.is_empty() { 0.0 } else { losses.iter().sum::<f64>() / losses.len() as f64 };
        trace.push(mean);
    }
    Ok(MlmOutcome { loss_trace: trace })
}
