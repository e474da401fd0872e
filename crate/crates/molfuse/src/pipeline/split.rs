//! Train/valid/test splitting.
//!
//! Scaffold splitting groups molecules by scaffold key, orders groups by size
//! (largest first) with ties broken by a seed-keyed hash, and fills train,
//! then valid, then test against the ratio cutoffs. Molecules sharing a
//! scaffold can never straddle two subsets. Different seeds reorder only the
//! equal-size ties, giving the "three random splits" protocol a deterministic
//! meaning.

use crate::config::SplitMethod;
use crate::util::Fnv64;
use rand::seq::SliceRandom;
use std::collections::BTreeMap;

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct DatasetSplit {
    pub train: Vec<usize>,
    pub valid: Vec<usize>,
    pub test: Vec<usize>,
    pub seed: u64,
    pub method: SplitMethod,
    pub warnings: Vec<String>,
}

impl DatasetSplit {
    pub fn len(&self) -> usize {
        self.train.len() + self.valid.len() + self.test.len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}

/// Scaffold split over per-molecule group keys (index-aligned).
pub fn scaffold_split(keys: &[String], train_frac: f64, valid_frac: f64, seed: u64) -> DatasetSplit {
    let mut groups: BTreeMap<&str, Vec<usize>> = BTreeMap::new();
    for (i, key) in keys.iter().enumerate() {
        groups.entry(key.as_str()).or_default().push(i);
    }
    let mut ordered: Vec<(&str, Vec<usize>)> = groups.into_iter().collect();
    ordered.sort_by(|a, b| {
        b.1.len()
            .cmp(&a.1.len())
            .then_with(|| tie_hash(seed, a.0).cmp(&tie_hash(seed, b.0)))
            .then_with(|| a.0.cmp(b.0))
    });

    let n = keys.len() as f64;
    let train_cutoff = train_frac * n;
    let valid_cutoff = (train_frac + valid_frac) * n;
    let mut split = DatasetSplit {
        train: Vec::new(),
        valid: Vec::new(),
        test: Vec::new(),
        seed,
        method: SplitMethod::Scaffold,
        warnings: Vec::new(),
    };
    for (_, members) in ordered {
        let g = members.len();
        if (split.train.len() + g) as f64 <= train_cutoff {
            split.train.extend(members);
        } else if (split.train.len() + split.valid.len() + g) as f64 <= valid_cutoff {
            split.valid.extend(members);
        } else {
            split.test.extend(members);
        }
    }
    // a dominant group can leave valid or test empty; surface it
    if !keys.is_empty() && split.train.is_empty() {
        split.warnings.push("train subset is empty".into());
    }
    if split.valid.is_empty() {
        split.warnings.push("valid subset is empty".into());
    }
    if split.test.is_empty() {
        split.warnings.push("test subset is empty".into());
    }
    split.train.sort_unstable();
    split.valid.sort_unstable();
    split.test.sort_unstable();
    split
}

/// Seeded random split (no grouping).
pub fn random_split(n: usize, train_frac: f64, valid_frac: f64, seed: u64) -> DatasetSplit {
    let mut order: Vec<usize> = (0..n).collect();
    let mut rng = crate::util::seeded_rng(seed, "random-split");
    order.shuffle(&mut rng);
    let n_train = (train_frac * n as f64).round() as usize;
    let n_valid = (valid_frac * n as f64).round() as usize;
    let mut split = DatasetSplit {
        train: order[..n_train.min(n)].to_vec(),
        valid: order[n_train.min(n)..(n_train + n_valid).min(n)].to_vec(),
        test: order[(n_train + n_valid).min(n)..].to_vec(),
        seed,
        method: SplitMethod::Random,
        warnings: Vec::new(),
    };
    split.train.sort_unstable();
    split.valid.sort_unstable();
    split.test.sort_unstable();
    split
}

fn tie_hash(seed: u64, key: &str) -> u64 {
    Fnv64::new().write_u64(seed).write_str(key).finish()
}
