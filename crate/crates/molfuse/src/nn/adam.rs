//! Adam with bias correction and per-group learning rates.

use super::params::ParamSet;
use ndarray::Array2;
use std::collections::BTreeMap;

/// Learning-rate table: a default plus per-group overrides keyed by the first
/// segment of the parameter name.
#[derive(Debug, Clone)]
pub struct LrTable {
    pub default: f64,
    pub per_group: BTreeMap<String, f64>,
}

impl LrTable {
    pub fn uniform(lr: f64) -> Self {
        LrTable { default: lr, per_group: BTreeMap::new() }
    }

    pub fn with(mut self, group: &str, lr: f64) -> Self {
        self.per_group.insert(group.to_string(), lr);
        self
    }

    pub fn rate_for(&self, name: &str) -> f64 {
        let group = ParamSet::group_of(name);
        *self.per_group.get(group).unwrap_or(&self.default)
    }
}

#[derive(Debug, Clone)]
pub struct Adam {
    beta1: f64,
    beta2: f64,
    eps: f64,
    t: u64,
    m: BTreeMap<String, Array2<f64>>,
    v: BTreeMap<String, Array2<f64>>,
}

impl Adam {
    pub fn new() -> Self {
        Adam { beta1: 0.9, beta2: 0.999, eps: 1e-8, t: 0, m: BTreeMap::new(), v: BTreeMap::new() }
    }

    /// One update over the given (name, gradient) pairs. Zero gradients leave
    /// parameters untouched: moments stay zero, so the step is exactly zero.
    pub fn step(&mut self, ps: &mut ParamSet, grads: &[(String, Array2<f64>)], lrs: &LrTable) {
        self.t += 1;
        let bc1 = 1.0 - self.beta1.powi(self.t as i32);
        let bc2 = 1.0 - self.beta2.powi(self.t as i32);
        for (name, grad) in grads {
            let lr = lrs.rate_for(name);
            let m = self
                .m
                .entry(name.clone())
                .or_insert_with(|| Array2::zeros(grad.dim()));
            *m *= self.beta1;
            *m += &(grad * (1.0 - self.beta1));
            let v = self
                .v
                .entry(name.clone())
                .or_insert_with(|| Array2::zeros(grad.dim()));
            *v *= self.beta2;
            *v += &(grad.mapv(|g| g * g) * (1.0 - self.beta2));

            let p = ps.get_mut(name);
            ndarray::Zip::from(&mut *p).and(&*m).and(&*v).for_each(|pv, &mv, &vv| {
                let mhat = mv / bc1;
                let vhat = vv / bc2;
                *pv -= lr * mhat / (vhat.sqrt() + self.eps);
            });
        }
    }
}

impl Default for Adam {
    fn default() -> Self {
        Self::new()
    }
}
