//! Central finite-difference gradient verification.
//!
//! `check` samples scalar coordinates across a parameter set, perturbs each by
//! ±h with everything else held fixed, and compares the numeric slope of a
//! caller-supplied loss against the analytic gradient from one backward pass.

use super::params::ParamSet;
use crate::util::seeded_rng;
use ndarray::Array2;
use rand::Rng;
use std::collections::BTreeMap;

pub struct GradCheckReport {
    pub checked: usize,
    pub max_rel_err: f64,
    pub failures: Vec<String>,
}

impl GradCheckReport {
    pub fn ok(&self) -> bool {
        self.failures.is_empty()
    }
}

/// Compare analytic gradients against central differences on `n_samples`
/// randomly chosen parameter coordinates (over trainable names only).
///
/// * `loss_fn` must evaluate the loss from scratch for a given parameter set.
/// * `grads` is the analytic gradient, keyed by parameter name.
///
/// A coordinate passes when |a − n| / max(|a|, |n|) < `tol`, or when both are
/// below 1e-8 in magnitude.
pub fn check<F>(
    ps: &ParamSet,
    trainable: &[String],
    grads: &BTreeMap<String, Array2<f64>>,
    loss_fn: F,
    n_samples: usize,
    h: f64,
    tol: f64,
    seed: u64,
) -> GradCheckReport
where
    F: Fn(&ParamSet) -> f64,
{
    let mut rng = seeded_rng(seed, "gradcheck");
    let mut coords: Vec<(String, usize, usize)> = Vec::new();
    for name in trainable {
        let dim = ps.get(name).dim();
        for i in 0..dim.0 {
            for j in 0..dim.1 {
                coords.push((name.clone(), i, j));
            }
        }
    }
    assert!(!coords.is_empty(), "no trainable coordinates to check");

    let mut picked = Vec::with_capacity(n_samples);
    for _ in 0..n_samples {
        picked.push(coords[rng.random_range(0..coords.len())].clone());
    }

    let mut max_rel = 0.0f64;
    let mut failures = Vec::new();
    for (name, i, j) in picked {
        let mut plus = ps.clone();
        plus.get_mut(&name)[[i, j]] += h;
        let mut minus = ps.clone();
        minus.get_mut(&name)[[i, j]] -= h;
        let numeric = (loss_fn(&plus) - loss_fn(&minus)) / (2.0 * h);
        let analytic = grads
            .get(&name)
            .map_or(0.0, |g| g[[i, j]]);
        let denom = analytic.abs().max(numeric.abs());
        if denom < 1e-8 {
            continue;
        }
        let rel = (analytic - numeric).abs() / denom;
        max_rel = max_rel.max(rel);
        if rel >= tol {
            failures.push(format!(
                "{name}[{i},{j}]: analytic {analytic:.6e} vs numeric {numeric:.6e} (rel {rel:.2e})"
            ));
        }
    }
    GradCheckReport { checked: n_samples, max_rel_err: max_rel, failures }
}
