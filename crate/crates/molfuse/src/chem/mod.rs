//! Molecular graphs parsed from SMILES.
//!
//! The parser covers the organic-subset grammar (B C N O P S F Cl Br I plus
//! bracket atoms, charges, isotopes, ring closures including `%nn`, branches,
//! `@`/`@@` tetrahedral tags, and `/`\\` bond directions). Aromaticity is taken
//! from the notation itself (lowercase atoms, `:` bonds); it is not
//! re-perceived. Ring perception produces a deterministic smallest set of
//! smallest rings.

mod canon;
mod periodic;
mod rings;
mod scaffold;
mod smiles;

pub use canon::{canonical_key, skeletal_key};
pub use periodic::{atomic_number, element_symbol};
pub use scaffold::{murcko_scaffold, Scaffold};
pub use smiles::parse_smiles;

use thiserror::Error;

/// Tetrahedral parity tag as written in the source SMILES.
/// `@@` is clockwise, `@` anticlockwise.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, serde::Serialize, serde::Deserialize)]
pub enum Parity {
    None,
    Cw,
    Ccw,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, serde::Serialize, serde::Deserialize)]
pub enum BondOrder {
    Single,
    Double,
    Triple,
    Aromatic,
}

impl BondOrder {
    /// Integer valence contribution; aromatic bonds contribute 1 and aromatic
    /// atoms give up one extra valence slot (see `implicit_hydrogens`).
    pub fn valence(self) -> u8 {
        match self {
            BondOrder::Single | BondOrder::Aromatic => 1,
            BondOrder::Double => 2,
            BondOrder::Triple => 3,
        }
    }

    /// Stable numeric code used by fingerprint and canonical-key hashing.
    pub fn code(self) -> u32 {
        match self {
            BondOrder::Single => 1,
            BondOrder::Double => 2,
            BondOrder::Triple => 3,
            BondOrder::Aromatic => 4,
        }
    }
}

/// `/` and `\` annotations; parsed and stored, never interpreted.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, serde::Serialize, serde::Deserialize)]
pub enum BondDir {
    None,
    Up,
    Down,
}

#[derive(Debug, Clone, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct Atom {
    pub element: String,
    pub atomic_number: u8,
    pub formal_charge: i8,
    pub implicit_h: u8,
    pub aromatic: bool,
    pub parity: Parity,
    pub isotope: Option<u16>,
    /// 0-based position in the parent graph.
    pub index: usize,
}

#[derive(Debug, Clone, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct Bond {
    pub a: usize,
    pub b: usize,
    pub order: BondOrder,
    pub direction: BondDir,
}

/// Parsed molecule: atoms, bonds, and a deterministic SSSR ring set.
#[derive(Debug, Clone, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct MolGraph {
    pub atoms: Vec<Atom>,
    pub bonds: Vec<Bond>,
    /// Smallest set of smallest rings, each a cycle of atom indices.
    pub rings: Vec<Vec<usize>>,
    pub source_smiles: String,
}

#[derive(Debug, Error, PartialEq, Eq)]
pub enum ParseError {
    #[error("syntax error at position {pos}: {msg}")]
    Syntax { pos: usize, msg: String },
    #[error("unsupported SMILES feature at position {pos}: {what}")]
    Unsupported { pos: usize, what: String },
}

impl MolGraph {
    pub fn n_atoms(&self) -> usize {
        self.atoms.len()
    }

    /// Adjacency lists; `adj[i]` holds `(neighbor, bond index)` pairs in bond
    /// declaration order.
    pub fn adjacency(&self) -> Vec<Vec<(usize, usize)>> {
        let mut adj = vec![Vec::new(); self.atoms.len()];
        for (bi, bond) in self.bonds.iter().enumerate() {
            adj[bond.a].push((bond.b, bi));
            adj[bond.b].push((bond.a, bi));
        }
        adj
    }

    /// Number of heavy (non-hydrogen) neighbors per atom.
    pub fn heavy_degree(&self, adj: &[Vec<(usize, usize)>], i: usize) -> u32 {
        adj[i]
            .iter()
            .filter(|(j, _)| self.atoms[*j].atomic_number != 1)
            .count() as u32
    }

    /// Hydrogens attached to atom `i`: implicit count plus explicit `[H]`
    /// neighbors.
    pub fn attached_hydrogens(&self, adj: &[Vec<(usize, usize)>], i: usize) -> u32 {
        let explicit = adj[i]
            .iter()
            .filter(|(j, _)| self.atoms[*j].atomic_number == 1)
            .count() as u32;
        u32::from(self.atoms[i].implicit_h) + explicit
    }

    /// Per-atom ring membership flags derived from the SSSR set.
    pub fn ring_flags(&self) -> Vec<bool> {
        let mut flags = vec![false; self.atoms.len()];
        for ring in &self.rings {
            for &i in ring {
                flags[i] = true;
            }
        }
        flags
    }

    /// Number of connected components.
    pub fn components(&self) -> usize {
        let adj = self.adjacency();
        let mut seen = vec![false; self.atoms.len()];
        let mut count = 0;
        for start in 0..self.atoms.len() {
            if seen[start] {
                continue;
            }
            count += 1;
            let mut stack = vec![start];
            seen[start] = true;
            while let Some(v) = stack.pop() {
                for &(w, _) in &adj[v] {
                    if !seen[w] {
                        seen[w] = true;
                        stack.push(w);
                    }
                }
            }
        }
        count
    }

    /// SSSR rings in which every atom is aromatic and every ring bond is an
    /// aromatic bond.
    pub fn count_aromatic_rings(&self) -> usize {
        let mut bond_order = std::collections::BTreeMap::new();
        for bond in &self.bonds {
            let key = (bond.a.min(bond.b), bond.a.max(bond.b));
            bond_order.insert(key, bond.order);
        }
        self.rings
            .iter()
            .filter(|ring| {
                let atoms_ok = ring.iter().all(|&i| self.atoms[i].aromatic);
                let bonds_ok = ring.iter().enumerate().all(|(k, &i)| {
                    let j = ring[(k + 1) % ring.len()];
                    bond_order.get(&(i.min(j), i.max(j))) == Some(&BondOrder::Aromatic)
                });
                atoms_ok && bonds_ok
            })
            .count()
    }

    /// Copy of this graph with atoms reordered by `perm`, where `perm[new] = old`.
    /// Bond endpoints are remapped and rings recomputed; used by invariance tests.
    pub fn permuted(&self, perm: &[usize]) -> MolGraph {
        assert_eq!(perm.len(), self.atoms.len());
        let mut old_to_new = vec![0usize; perm.len()];
        for (new, &old) in perm.iter().enumerate() {
            old_to_new[old] = new;
        }
        let atoms: Vec<Atom> = perm
            .iter()
            .enumerate()
            .map(|(new, &old)| {
                let mut a = self.atoms[old].clone();
                a.index = new;
                a
            })
            .collect();
        let bonds: Vec<Bond> = self
            .bonds
            .iter()
            .map(|b| Bond {
                a: old_to_new[b.a],
                b: old_to_new[b.b],
                order: b.order,
                direction: b.direction,
            })
            .collect();
        let rings = rings::sssr(atoms.len(), &bonds);
        MolGraph {
            atoms,
            bonds,
            rings,
            source_smiles: String::new(),
        }
    }

    /// Induced subgraph on `keep` (parent atom indices, any order). Atoms are
    /// renumbered in ascending parent order; rings are recomputed.
    pub fn induced_subgraph(&self, keep: &[usize]) -> MolGraph {
        let mut sorted: Vec<usize> = keep.to_vec();
        sorted.sort_unstable();
        sorted.dedup();
        let mut old_to_new = std::collections::BTreeMap::new();
        for (new, &old) in sorted.iter().enumerate() {
            old_to_new.insert(old, new);
        }
        let atoms: Vec<Atom> = sorted
            .iter()
            .enumerate()
            .map(|(new, &old)| {
                let mut a = self.atoms[old].clone();
                a.index = new;
                a
            })
            .collect();
        let bonds: Vec<Bond> = self
            .bonds
            .iter()
            .filter(|b| old_to_new.contains_key(&b.a) && old_to_new.contains_key(&b.b))
            .map(|b| Bond {
                a: old_to_new[&b.a],
                b: old_to_new[&b.b],
                order: b.order,
                direction: b.direction,
            })
            .collect();
        let rings = rings::sssr(atoms.len(), &bonds);
        MolGraph {
            atoms,
            bonds,
            rings,
            source_smiles: String::new(),
        }
    }

    /// Line-oriented debug dump: one atom per line, then one bond per line.
    pub fn dump(&self) -> String {
        use std::fmt::Write;
        let mut out = String::new();
        let adj = self.adjacency();
        for (i, a) in self.atoms.iter().enumerate() {
            let parity = match a.parity {
                Parity::None => "-",
                Parity::Cw => "@@",
                Parity::Ccw => "@",
            };
            writeln!(
                out,
                "atom {} {} z={} charge={} h={} aromatic={} parity={} isotope={} degree={}",
                i,
                a.element,
                a.atomic_number,
                a.formal_charge,
                a.implicit_h,
                a.aromatic,
                parity,
                a.isotope.map_or(0, u32::from),
                adj[i].len(),
            )
            .unwrap();
        }
        for b in &self.bonds {
            let order = match b.order {
                BondOrder::Single => "single",
                BondOrder::Double => "double",
                BondOrder::Triple => "triple",
                BondOrder::Aromatic => "aromatic",
            };
            let dir = match b.direction {
                BondDir::None => "-",
                BondDir::Up => "up",
                BondDir::Down => "down",
            };
            writeln!(out, "bond {} {} {} {}", b.a, b.b, order, dir).unwrap();
        }
        out
    }
}
