//! Multi-featurization molecular embeddings.
//!
//! A molecule enters as a SMILES string and is turned into four complementary
//! views: a 2D bond graph, a 3D point cloud (ingested from XYZ files), a
//! circular fingerprint, and a token sequence. Each view has its own neural
//! encoder; a learned attention network fuses the four embeddings into one
//! vector per molecule. Pretraining aligns every view with the fused vector
//! via an InfoNCE objective; fine-tuning attaches a linear task head.
//!
//! Module map:
//! - [`chem`]: SMILES parser, ring perception, scaffolds, canonical keys
//! - [`featurize`]: view construction, Morgan fingerprints, BPE tokenizer, XYZ input
//! - [`nn`]: reverse-mode autodiff tape, parameter store, Adam, gradient checking
//! - [`encoders`]: the four view encoders plus masked-token pretraining
//! - [`fusion`]: attention-weighted view aggregation and pooling ablations
//! - [`objective`]: projected-cosine critic and the contrastive loss
//! - [`pipeline`]: splits, training loops, metrics, probe case studies
//! - [`config`] / [`dataset`] / [`cache`] / [`checkpoint`] / [`cli`]: run plumbing

pub mod cache;
pub mod chem;
pub mod checkpoint;
pub mod cli;
pub mod config;
pub mod dataset;
pub mod encoders;
pub mod featurize;
pub mod fusion;
pub mod nn;
pub mod objective;
pub mod pipeline;
pub mod util;
