//! Bemis–Murcko framework extraction by iterative pruning.

use super::MolGraph;

/// Atom indices of the molecular framework: ring systems plus linkers.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Scaffold {
    pub atom_indices: Vec<usize>,
}

impl Scaffold {
    pub fn is_empty(&self) -> bool {
        self.atom_indices.is_empty()
    }
}

/// Iteratively delete non-ring atoms of degree ≤ 1 until a fixpoint.
/// Acyclic molecules collapse to the empty scaffold. Exocyclic substituents
/// (including double-bond partners) are pruned; only rings and the paths
/// connecting them survive.
pub fn murcko_scaffold(g: &MolGraph) -> Scaffold {
    let n = g.n_atoms();
    let in_ring = g.ring_flags();
    let adj = g.adjacency();
    let mut alive = vec![true; n];
    let mut degree: Vec<usize> = (0..n).map(|i| adj[i].len()).collect();

    loop {
        let mut removed = false;
        for i in 0..n {
            if alive[i] && !in_ring[i] && degree[i] <= 1 {
                alive[i] = false;
                removed = true;
                for &(j, _) in &adj[i] {
                    if alive[j] {
                        degree[j] -= 1;
                    }
                }
            }
        }
        if !removed {
            break;
        }
    }

    Scaffold {
        atom_indices: (0..n).filter(|&i| alive[i]).collect(),
    }
}
