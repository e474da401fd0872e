//! Named parameter store shared by encoders, fusion, critic, and task heads.
//!
//! Names are dotted paths (`gin.layer0.w1`, `fusion.q`); the first segment is
//! the group used for per-group learning rates and freeze decisions.

use ndarray::Array2;
use std::collections::BTreeMap;

use super::graph::{Graph, Var};

#[derive(Debug, Clone, Default, PartialEq)]
pub struct ParamSet {
    names: Vec<String>,
    values: Vec<Array2<f64>>,
    by_name: BTreeMap<String, usize>,
}

impl ParamSet {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn insert(&mut self, name: impl Into<String>, value: Array2<f64>) {
        let name = name.into();
        assert!(
            self.by_name.insert(name.clone(), self.values.len()).is_none(),
            "duplicate parameter {name}"
        );
        self.names.push(name);
        self.values.push(value);
    }

    pub fn contains(&self, name: &str) -> bool {
        self.by_name.contains_key(name)
    }

    pub fn get(&self, name: &str) -> &Array2<f64> {
        let i = self.by_name[name];
        &self.values[i]
    }

    pub fn get_mut(&mut self, name: &str) -> &mut Array2<f64> {
        let i = self.by_name[name];
        &mut self.values[i]
    }

    pub fn try_get(&self, name: &str) -> Option<&Array2<f64>> {
        self.by_name.get(name).map(|&i| &self.values[i])
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    /// Iterate in insertion order.
    pub fn iter(&self) -> impl Iterator<Item = (&str, &Array2<f64>)> {
        self.names.iter().map(String::as_str).zip(self.values.iter())
    }

    pub fn names(&self) -> impl Iterator<Item = &str> {
        self.names.iter().map(String::as_str)
    }

    /// Group prefix of a dotted name (`gin.layer0.w1` → `gin`).
    pub fn group_of(name: &str) -> &str {
        name.split('.').next().unwrap_or(name)
    }

    /// Names matching a group prefix.
    pub fn group_names(&self, group: &str) -> Vec<String> {
        self.names
            .iter()
            .filter(|n| Self::group_of(n) == group)
            .cloned()
            .collect()
    }

    /// Total number of scalar parameters.
    pub fn n_scalars(&self) -> usize {
        self.values.iter().map(Array2::len).sum()
    }

    /// Global ℓ₂ norm over every stored value; training diagnostics.
    pub fn l2_norm(&self) -> f64 {
        self.values
            .iter()
            .map(|v| v.iter().map(|t| t * t).sum::<f64>())
            .sum::<f64>()
            .sqrt()
    }

    pub fn merge(&mut self, other: ParamSet) {
        for (name, value) in other.names.into_iter().zip(other.values) {
            self.insert(name, value);
        }
    }
}

/// Parameters materialized on a graph: trainable groups become `param` leaves,
/// frozen groups become constants so no gradient flows into them at all.
pub struct Bound {
    vars: BTreeMap<String, Var>,
    trainable: Vec<String>,
}

impl Bound {
    pub fn new(g: &mut Graph, ps: &ParamSet, frozen_groups: &[&str]) -> Self {
        let mut vars = BTreeMap::new();
        let mut trainable = Vec::new();
        for (name, value) in ps.iter() {
            let group = ParamSet::group_of(name);
            let var = if frozen_groups.contains(&group) {
                g.constant(value.clone())
            } else {
                trainable.push(name.to_string());
                g.param(value.clone())
            };
            vars.insert(name.to_string(), var);
        }
        Bound { vars, trainable }
    }

    pub fn var(&self, name: &str) -> Var {
        *self
            .vars
            .get(name)
            .unwrap_or_else(|| panic!("parameter {name} not bound"))
    }

    /// Analytic gradients of every trainable parameter after `backward`;
    /// untouched parameters yield zero gradients.
    pub fn gradients(&self, g: &Graph, ps: &ParamSet) -> Vec<(String, Array2<f64>)> {
        self.trainable
            .iter()
            .map(|name| {
                let var = self.vars[name];
                let grad = g
                    .grad(var)
                    .cloned()
                    .unwrap_or_else(|| Array2::zeros(ps.get(name).dim()));
                (name.clone(), grad)
            })
            .collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::array;

    #[test]
    fn groups_and_lookup() {
        let mut ps = ParamSet::new();
        ps.insert("gin.layer0.w1", array![[1.0]]);
        ps.insert("gin.layer1.w1", array![[2.0]]);
        ps.insert("fusion.q", array![[3.0]]);
        assert_eq!(ParamSet::group_of("gin.layer0.w1"), "gin");
        assert_eq!(ps.group_names("gin").len(), 2);
        assert_eq!(ps.get("fusion.q")[[0, 0]], 3.0);
        assert_eq!(ps.n_scalars(), 3);
    }

    #[test]
    fn frozen_groups_get_no_gradient() {
        let mut ps = ParamSet::new();
        ps.insert("a.w", array![[2.0]]);
        ps.insert("b.w", array![[3.0]]);
        let mut g = Graph::new();
        let bound = Bound::new(&mut g, &ps, &["b"]);
        let prod = g.mul_elem(bound.var("a.w"), bound.var("b.w"));
        let loss = g.sum_all(prod);
        g.backward(loss);
        let grads = bound.gradients(&g, &ps);
        assert_eq!(grads.len(), 1);
        assert_eq!(grads[0].0, "a.w");
        assert_eq!(grads[0].1[[0, 0]], 3.0);
    }
}
