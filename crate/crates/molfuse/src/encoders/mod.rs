//! The four view encoders: message-passing 2D graph, continuous-filter 3D,
//! fingerprint self-attention (with an MLP ablation variant), and a small
//! transformer over token sequences with masked-token pretraining.
//!
//! Every forward builds onto a caller-owned [`Graph`] and returns a 1×D
//! embedding node, so a whole batch (all molecules, all views, fusion, loss)
//! lives on one tape and trains jointly.

mod fp;
mod gin;
mod schnet;
mod smiles_enc;

pub use fp::{fp_attention_forward, fp_mlp_forward, sinusoidal_positions};
pub use gin::gin_forward;
pub use schnet::{rbf_centers, schnet_forward};
pub use smiles_enc::{mask_tokens, mlm_batch_loss, mlm_pretrain, sm_backbone, sm_forward, MlmOutcome};

use crate::featurize::{N_ATOM_TYPES, N_BOND_DIRS, N_BOND_TYPES, N_CHIRALITY_TAGS};
use crate::nn::{glorot, zeros_row, ParamSet};
use ndarray::Array2;
use serde::{Deserialize, Serialize};
use thiserror::Error;

/// The four featurization views.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
pub enum View {
    TwoD,
    ThreeD,
    Fp,
    Sm,
}

impl View {
    pub const ALL: [View; 4] = [View::TwoD, View::ThreeD, View::Fp, View::Sm];

    pub fn label(self) -> &'static str {
        match self {
            View::TwoD => "2d",
            View::ThreeD => "3d",
            View::Fp => "fp",
            View::Sm => "sm",
        }
    }

    pub fn parse(s: &str) -> Option<View> {
        match s {
            "2d" => Some(View::TwoD),
            "3d" => Some(View::ThreeD),
            "fp" => Some(View::Fp),
            "sm" => Some(View::Sm),
            _ => None,
        }
    }

    /// Parameter-group prefix of this view's encoder.
    pub fn group(self) -> &'static str {
        match self {
            View::TwoD => "gin",
            View::ThreeD => "schnet",
            View::Fp => "fp",
            View::Sm => "sm",
        }
    }
}

impl std::fmt::Display for View {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.label())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum FpEncoderKind {
    Attention,
    Mlp,
}

/// Architecture hyperparameters. Field defaults follow the reference setup:
/// shared embedding width 300, five GIN layers, six 128-wide interaction
/// layers with 50 radial basis functions on [0, 10] Å, 64-dim fingerprint bit
/// embeddings with 8 attention heads, and a 2-layer/4-head/128-dim token
/// backbone standing in for a full pretrained language model.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelConfig {
    pub dim: usize,
    pub gin_layers: usize,
    pub schnet_layers: usize,
    pub schnet_hidden: usize,
    pub rbf_count: usize,
    pub rbf_max: f64,
    pub rbf_gamma: f64,
    /// Optional interaction cutoff in Å; `None` means all-pairs.
    pub schnet_cutoff: Option<f64>,
    pub fp_bits: usize,
    pub fp_radius: u32,
    pub fp_embed_dim: usize,
    pub fp_heads: usize,
    pub fp_encoder: FpEncoderKind,
    pub vocab_size: usize,
    pub max_seq_len: usize,
    pub sm_layers: usize,
    pub sm_heads: usize,
    pub sm_hidden: usize,
    pub sm_ffn_hidden: usize,
    /// Freeze the token backbone during contrastive training and fine-tuning;
    /// the projection head on top stays trainable either way.
    pub sm_frozen: bool,
    pub critic_hidden: usize,
    pub dropout: DropoutRates,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize, Default)]
pub struct DropoutRates {
    pub gin: f64,
    pub schnet: f64,
    pub fp: f64,
    pub sm: f64,
}

impl Default for ModelConfig {
    fn default() -> Self {
        ModelConfig {
            dim: 300,
            gin_layers: 5,
            schnet_layers: 6,
            schnet_hidden: 128,
            rbf_count: 50,
            rbf_max: 10.0,
            rbf_gamma: 10.0,
            schnet_cutoff: None,
            fp_bits: 1024,
            fp_radius: 2,
            fp_embed_dim: 64,
            fp_heads: 8,
            fp_encoder: FpEncoderKind::Attention,
            vocab_size: 512,
            max_seq_len: 128,
            sm_layers: 2,
            sm_heads: 4,
            sm_hidden: 128,
            sm_ffn_hidden: 256,
            sm_frozen: true,
            critic_hidden: 300,
            dropout: DropoutRates::default(),
        }
    }
}

impl ModelConfig {
    /// A small configuration for tests and toy corpora.
    pub fn desk() -> Self {
        ModelConfig {
            fp_bits: 256,
            max_seq_len: 96,
            ..ModelConfig::default()
        }
    }

    pub fn validate(&self) -> Result<(), String> {
        if self.fp_embed_dim % self.fp_heads != 0 {
            return Err(format!(
                "fp embed dim {} not divisible by {} heads",
                self.fp_embed_dim, self.fp_heads
            ));
        }
        if self.sm_hidden % self.sm_heads != 0 {
            return Err(format!(
                "sm hidden {} not divisible by {} heads",
                self.sm_hidden, self.sm_heads
            ));
        }
        if !self.fp_bits.is_power_of_two() {
            return Err(format!("fp bits {} must be a power of two", self.fp_bits));
        }
        if self.rbf_count < 2 {
            return Err("need at least two radial basis centers".into());
        }
        Ok(())
    }
}

#[derive(Debug, Error, PartialEq)]
pub enum EncoderError {
    #[error("shape error in {encoder}: {detail}")]
    Shape { encoder: &'static str, detail: String },
    #[error("token sequence of length {len} exceeds maximum {max}")]
    SequenceTooLong { len: usize, max: usize },
    #[error("degenerate geometry: non-finite output from the 3D encoder")]
    DegenerateGeometry,
}

pub(crate) fn shape_err(encoder: &'static str, detail: impl Into<String>) -> EncoderError {
    EncoderError::Shape { encoder, detail: detail.into() }
}

/// Initialize every encoder's parameters into `ps` under the groups
/// `gin.*`, `schnet.*`, `fp.*`, `sm.*`, `sm_head.*`.
pub fn init_encoder_params(cfg: &ModelConfig, seed: u64, ps: &mut ParamSet) {
    let d = cfg.dim;
    let add = |ps: &mut ParamSet, name: String, rows: usize, cols: usize| {
        let v = glorot(seed, &name, rows, cols);
        ps.insert(name, v);
    };

    // 2D message passing
    add(ps, "gin.atom_embed".into(), N_ATOM_TYPES, d);
    add(ps, "gin.chir_embed".into(), N_CHIRALITY_TAGS, d);
    for k in 0..cfg.gin_layers {
        add(ps, format!("gin.layer{k}.bond_type"), N_BOND_TYPES, d);
        add(ps, format!("gin.layer{k}.bond_dir"), N_BOND_DIRS, d);
        add(ps, format!("gin.layer{k}.w1"), d, d);
        ps.insert(format!("gin.layer{k}.b1"), zeros_row(d));
        add(ps, format!("gin.layer{k}.w2"), d, d);
        ps.insert(format!("gin.layer{k}.b2"), zeros_row(d));
    }

    // 3D continuous-filter convolutions
    let h = cfg.schnet_hidden;
    add(ps, "schnet.atom_embed".into(), N_ATOM_TYPES, h);
    for k in 0..cfg.schnet_layers {
        add(ps, format!("schnet.layer{k}.filter.w1"), cfg.rbf_count, h);
        ps.insert(format!("schnet.layer{k}.filter.b1"), zeros_row(h));
        add(ps, format!("schnet.layer{k}.filter.w2"), h, h);
        ps.insert(format!("schnet.layer{k}.filter.b2"), zeros_row(h));
        add(ps, format!("schnet.layer{k}.update.w1"), h, h);
        ps.insert(format!("schnet.layer{k}.update.b1"), zeros_row(h));
        add(ps, format!("schnet.layer{k}.update.w2"), h, h);
        ps.insert(format!("schnet.layer{k}.update.b2"), zeros_row(h));
    }
    add(ps, "schnet.out.w".into(), h, d);
    ps.insert("schnet.out.b", zeros_row(d));

    // fingerprint encoder (attention or MLP variant)
    match cfg.fp_encoder {
        FpEncoderKind::Attention => {
            let df = cfg.fp_embed_dim;
            let dh = df / cfg.fp_heads;
            add(ps, "fp.val_embed".into(), 2, df);
            for hd in 0..cfg.fp_heads {
                add(ps, format!("fp.head{hd}.wq"), df, dh);
                add(ps, format!("fp.head{hd}.wk"), df, dh);
                add(ps, format!("fp.head{hd}.wv"), df, dh);
            }
            add(ps, "fp.out.w".into(), df, d);
            ps.insert("fp.out.b", zeros_row(d));
        }
        FpEncoderKind::Mlp => {
            add(ps, "fp.mlp.w1".into(), cfg.fp_bits, d);
            ps.insert("fp.mlp.b1", zeros_row(d));
            add(ps, "fp.mlp.w2".into(), d, d);
            ps.insert("fp.mlp.b2", zeros_row(d));
        }
    }

    // token backbone + projection head + masked-token output layer
    let ds = cfg.sm_hidden;
    let dh = ds / cfg.sm_heads;
    add(ps, "sm.tok_embed".into(), cfg.vocab_size, ds);
    add(ps, "sm.pos_embed".into(), cfg.max_seq_len, ds);
    for l in 0..cfg.sm_layers {
        for hd in 0..cfg.sm_heads {
            add(ps, format!("sm.layer{l}.head{hd}.wq"), ds, dh);
            add(ps, format!("sm.layer{l}.head{hd}.wk"), ds, dh);
            add(ps, format!("sm.layer{l}.head{hd}.wv"), ds, dh);
        }
        add(ps, format!("sm.layer{l}.attn_out.w"), ds, ds);
        ps.insert(format!("sm.layer{l}.attn_out.b"), zeros_row(ds));
        ps.insert(format!("sm.layer{l}.ln1.gamma"), Array2::ones((1, ds)));
        ps.insert(format!("sm.layer{l}.ln1.beta"), zeros_row(ds));
        add(ps, format!("sm.layer{l}.ffn.w1"), ds, cfg.sm_ffn_hidden);
        ps.insert(format!("sm.layer{l}.ffn.b1"), zeros_row(cfg.sm_ffn_hidden));
        add(ps, format!("sm.layer{l}.ffn.w2"), cfg.sm_ffn_hidden, ds);
        ps.insert(format!("sm.layer{l}.ffn.b2"), zeros_row(ds));
        ps.insert(format!("sm.layer{l}.ln2.gamma"), Array2::ones((1, ds)));
        ps.insert(format!("sm.layer{l}.ln2.beta"), zeros_row(ds));
    }
    add(ps, "sm.mlm.w".into(), ds, cfg.vocab_size);
    ps.insert("sm.mlm.b", zeros_row(cfg.vocab_size));
    add(ps, "sm_head.w1".into(), ds, d);
    ps.insert("sm_head.b1", zeros_row(d));
    add(ps, "sm_head.w2".into(), d, d);
    ps.insert("sm_head.b2", zeros_row(d));
}

/// Inverted-dropout mask as a constant factor; a rate of zero adds nothing to
/// the tape.
pub(crate) fn maybe_dropout(
    g: &mut crate::nn::Graph,
    x: crate::nn::Var,
    rate: f64,
    rng: Option<&mut rand_chacha::ChaCha8Rng>,
) -> crate::nn::Var {
    match rng {
        Some(rng) if rate > 0.0 => {
            use rand::Rng;
            let dim = g.value(x).dim();
            let keep = 1.0 - rate;
            let mask = Array2::from_shape_fn(dim, |_| {
                if rng.random_range(0.0..1.0) < keep {
                    1.0 / keep
                } else {
                    0.0
                }
            });
            let m = g.constant(mask);
            g.mul_elem(x, m)
        }
        _ => x,
    }
}
