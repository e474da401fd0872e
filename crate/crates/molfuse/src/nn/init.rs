//! Glorot-uniform parameter initialization with per-name RNG streams.
//!
//! Each tensor draws from a stream keyed by (seed, parameter name), so adding
//! or reordering parameters never shifts another tensor's initial values.

use crate::util::seeded_rng;
use ndarray::Array2;
use rand::Rng;

/// Uniform Glorot: limit = sqrt(6 / (fan_in + fan_out)).
pub fn glorot(seed: u64, name: &str, rows: usize, cols: usize) -> Array2<f64> {
    let mut rng = seeded_rng(seed, name);
    let limit = (6.0 / (rows + cols) as f64).sqrt();
    Array2::from_shape_fn((rows, cols), |_| rng.random_range(-limit..limit))
}

pub fn zeros_row(cols: usize) -> Array2<f64> {
    Array2::zeros((1, cols))
}
