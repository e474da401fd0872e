//! Order-invariant structure keys from iterative neighborhood refinement.
//!
//! Atoms start from a hashed invariant tuple and are refined with their
//! neighbors' labels until the label partition stops splitting; the key hashes
//! the sorted label multiset plus sorted labeled edges. Graphs differing only
//! in atom order produce identical keys. This is a grouping key, not a full
//! canonical form: parity tags are deliberately ignored so that rewritten
//! branch orders (which flip `@`/`@@` semantics) do not split groups.

use super::MolGraph;
use crate::util::Fnv64;

/// Deterministic key, identical for graphs that differ only in atom ordering.
pub fn canonical_key(g: &MolGraph) -> String {
    key_with_options(g, true)
}

/// Key for scaffold grouping: hydrogen counts are excluded, so frameworks cut
/// out of differently substituted parents (whose attachment atoms lost
/// hydrogens to substituents) collapse to the same group.
pub fn skeletal_key(g: &MolGraph) -> String {
    key_with_options(g, false)
}

fn key_with_options(g: &MolGraph, include_h: bool) -> String {
    let n = g.n_atoms();
    if n == 0 {
        return "0-0-0000000000000000".to_string();
    }
    let adj = g.adjacency();
    let in_ring = g.ring_flags();

    let mut labels: Vec<u64> = (0..n)
        .map(|i| {
            let a = &g.atoms[i];
            let mut h = Fnv64::new()
                .write_u64(u64::from(a.atomic_number))
                .write_u64(u64::from(g.heavy_degree(&adj, i)))
                .write_u64(u64::from(a.formal_charge as u8))
                .write_u64(u64::from(a.isotope.unwrap_or(0)))
                .write_u64(u64::from(in_ring[i]))
                .write_u64(u64::from(a.aromatic));
            if include_h {
                h = h.write_u64(u64::from(g.attached_hydrogens(&adj, i)));
            }
            h.finish()
        })
        .collect();

    let mut distinct = count_distinct(&labels);
    for round in 1..=n as u64 {
        let next: Vec<u64> = (0..n)
            .map(|i| {
                let mut neigh: Vec<(u32, u64)> = adj[i]
                    .iter()
                    .map(|&(j, bi)| (g.bonds[bi].order.code(), labels[j]))
                    .collect();
                neigh.sort_unstable();
                let mut h = Fnv64::new().write_u64(round).write_u64(labels[i]);
                for (code, l) in neigh {
                    h = h.write_u64(u64::from(code)).write_u64(l);
                }
                h.finish()
            })
            .collect();
        let next_distinct = count_distinct(&next);
        labels = next;
        if next_distinct <= distinct {
            break;
        }
        distinct = next_distinct;
    }

    let mut sorted = labels.clone();
    sorted.sort_unstable();
    let mut edges: Vec<(u64, u64, u32)> = g
        .bonds
        .iter()
        .map(|b| {
            let (x, y) = (labels[b.a], labels[b.b]);
            (x.min(y), x.max(y), b.order.code())
        })
        .collect();
    edges.sort_unstable();

    let mut h = Fnv64::new();
    for l in sorted {
        h = h.write_u64(l);
    }
    for (a, b, c) in edges {
        h = h.write_u64(a).write_u64(b).write_u64(u64::from(c));
    }
    format!("{}-{}-{:016x}", n, g.bonds.len(), h.finish())
}

fn count_distinct(labels: &[u64]) -> usize {
    let mut v = labels.to_vec();
    v.sort_unstable();
    v.dedup();
    v.len()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::chem::parse_smiles;
    use rand::seq::SliceRandom;
    use rand_chacha::rand_core::SeedableRng;

    #[test]
    fn same_molecule_different_writing() {
        let pairs = [
            ("CCO", "OCC"),
            ("Cc1ccccc1", "c1ccccc1C"),
            ("c1ccc2ccccc2c1", "c2ccc1ccccc1c2"),
            ("CC(=O)O", "OC(C)=O"),
        ];
        for (a, b) in pairs {
            let ka = canonical_key(&parse_smiles(a).unwrap());
            let kb = canonical_key(&parse_smiles(b).unwrap());
            assert_eq!(ka, kb, "{a} vs {b}");
        }
    }

    #[test]
    fn different_molecules_differ() {
        let pairs = [("CCO", "CCN"), ("c1ccccc1", "C1CCCCC1"), ("CC(=O)O", "CC(=O)N"), ("CCO", "CCCO")];
        for (a, b) in pairs {
            let ka = canonical_key(&parse_smiles(a).unwrap());
            let kb = canonical_key(&parse_smiles(b).unwrap());
            assert_ne!(ka, kb, "{a} vs {b}");
        }
    }

    #[test]
    fn fifty_permutations_one_key() {
        let g = parse_smiles("CC(C)Cc1ccc(cc1)C(C)C(=O)O").unwrap(); // 15 heavy atoms
        let base = canonical_key(&g);
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(42);
        let mut keys = std::collections::BTreeSet::new();
        keys.insert(base);
        for _ in 0..50 {
            let mut perm: Vec<usize> = (0..g.n_atoms()).collect();
            perm.shuffle(&mut rng);
            keys.insert(canonical_key(&g.permuted(&perm)));
        }
        assert_eq!(keys.len(), 1);
    }

    #[test]
    fn skeletal_key_ignores_substitution_hydrogens() {
        use crate::chem::murcko_scaffold;
        let mut keys = std::collections::BTreeSet::new();
        for s in ["Cc1ccccc1", "CCc1ccccc1", "Cc1ccc(C)cc1", "c1ccccc1"] {
            let g = parse_smiles(s).unwrap();
            let sc = murcko_scaffold(&g);
            let sub = g.induced_subgraph(&sc.atom_indices);
            keys.insert(skeletal_key(&sub));
        }
        assert_eq!(keys.len(), 1, "all benzene frameworks should group together");
    }

    #[test]
    fn symmetric_positional_isomers_may_share_skeleton_but_not_full_key() {
        let a = parse_smiles("CCO").unwrap();
        let b = parse_smiles("COC").unwrap(); // same formula, different connectivity
        assert_ne!(canonical_key(&a), canonical_key(&b));
    }
}
