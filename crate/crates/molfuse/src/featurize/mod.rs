//! Model-ready views of a molecule: graph tensors, 3D positions, binary
//! fingerprint, and token sequence.

mod bpe;
mod morgan;
mod xyz;

pub use bpe::{BpeVocab, VocabError, BASE_ID, CLS_ID, MASK_ID, PAD_ID, UNK_ID};
pub use morgan::{initial_identifier, morgan_fingerprint, round_identifier, FpBits};
pub use xyz::{load_conformer, load_conformers, parse_xyz_frames, write_xyz_frame, XyzError, XyzFrame};

use crate::chem::{BondDir, BondOrder, MolGraph, Parity};
use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Fixed atom-type table: organic subset plus hydrogen; everything else maps
/// to the trailing UNK slot so rare elements never crash downstream code.
pub const ATOM_TYPE_ELEMENTS: [&str; 11] = ["B", "C", "N", "O", "P", "S", "F", "Cl", "Br", "I", "H"];

/// Number of atom-type indices including the UNK slot.
pub const N_ATOM_TYPES: usize = ATOM_TYPE_ELEMENTS.len() + 1;
pub const ATOM_TYPE_UNK: usize = ATOM_TYPE_ELEMENTS.len();

/// Chirality tag indices: none, clockwise, anticlockwise, other.
pub const N_CHIRALITY_TAGS: usize = 4;
pub const N_BOND_TYPES: usize = 4;
pub const N_BOND_DIRS: usize = 3;

pub fn atom_type_index(element: &str) -> usize {
    ATOM_TYPE_ELEMENTS
        .iter()
        .position(|&e| e == element)
        .unwrap_or(ATOM_TYPE_UNK)
}

pub fn chirality_index(p: Parity) -> usize {
    match p {
        Parity::None => 0,
        Parity::Cw => 1,
        Parity::Ccw => 2,
    }
}

pub fn bond_type_index(o: BondOrder) -> usize {
    match o {
        BondOrder::Single => 0,
        BondOrder::Double => 1,
        BondOrder::Triple => 2,
        BondOrder::Aromatic => 3,
    }
}

pub fn bond_dir_index(d: BondDir) -> usize {
    match d {
        BondDir::None => 0,
        BondDir::Up => 1,
        BondDir::Down => 2,
    }
}

#[derive(Debug, Error, PartialEq)]
pub enum FeaturizeError {
    #[error("coordinate rows ({found}) do not align with atom count ({expected})")]
    Alignment { expected: usize, found: usize },
}

/// One bond as (endpoint, endpoint, bond-type index, direction index).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct BondFeat {
    pub a: usize,
    pub b: usize,
    pub type_idx: usize,
    pub dir_idx: usize,
}

/// The four views of one molecule. The adjacency matrix is implied by the
/// bond list (see [`MolViews::adjacency_dense`]); positions are optional and
/// echoed bit-exact from the supplied conformer.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MolViews {
    pub n_atoms: usize,
    /// Per atom: (atom-type index, chirality-tag index).
    pub atom_feats: Vec<[usize; 2]>,
    pub bonds: Vec<BondFeat>,
    pub positions: Option<Vec<[f64; 3]>>,
    pub fingerprint: FpBits,
    /// CLS-prefixed token ids.
    pub tokens: Vec<u32>,
}

impl MolViews {
    /// Dense symmetric adjacency with a zero diagonal.
    pub fn adjacency_dense(&self) -> Vec<Vec<u8>> {
        let mut a = vec![vec![0u8; self.n_atoms]; self.n_atoms];
        for b in &self.bonds {
            a[b.a][b.b] = 1;
            a[b.b][b.a] = 1;
        }
        a
    }
}

/// Assemble all four views. `coords`, when given, must be row-aligned with
/// `g.atoms`.
pub fn build_views(
    g: &MolGraph,
    coords: Option<&[[f64; 3]]>,
    vocab: &BpeVocab,
    fp_bits: usize,
    fp_radius: u32,
) -> Result<MolViews, FeaturizeError> {
    if let Some(c) = coords {
        if c.len() != g.n_atoms() {
            return Err(FeaturizeError::Alignment { expected: g.n_atoms(), found: c.len() });
        }
    }
    let atom_feats = g
        .atoms
        .iter()
        .map(|a| [atom_type_index(&a.element), chirality_index(a.parity)])
        .collect();
    let bonds = g
        .bonds
        .iter()
        .map(|b| BondFeat {
            a: b.a,
            b: b.b,
            type_idx: bond_type_index(b.order),
            dir_idx: bond_dir_index(b.direction),
        })
        .collect();
    Ok(MolViews {
        n_atoms: g.n_atoms(),
        atom_feats,
        bonds,
        positions: coords.map(<[[f64; 3]]>::to_vec),
        fingerprint: morgan_fingerprint(g, fp_radius, fp_bits),
        tokens: vocab.encode(&g.source_smiles),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::chem::parse_smiles;

    fn vocab() -> BpeVocab {
        BpeVocab::train(&["CCOc1ccccc1N=[O@H+-\\/#]()23".to_string()], 30).unwrap()
    }

    #[test]
    fn methane_views() {
        let g = parse_smiles("C").unwrap();
        let v = build_views(&g, None, &vocab(), 1024, 2).unwrap();
        assert_eq!(v.n_atoms, 1);
        assert_eq!(v.adjacency_dense(), vec![vec![0]]);
        assert_eq!(v.atom_feats, vec![[atom_type_index("C"), 0]]);
        assert!(v.fingerprint.popcount() >= 1);
        assert_eq!(v.tokens[0], CLS_ID);
    }

    #[test]
    fn positions_echoed_bit_exact() {
        let g = parse_smiles("CCO").unwrap();
        let coords = [[0.1, 0.2, 0.3], [1.0, -1.0, 0.5], [2.0, 0.25, -0.125]];
        let v = build_views(&g, Some(&coords), &vocab(), 256, 2).unwrap();
        assert_eq!(v.positions.as_deref(), Some(&coords[..]));
    }

    #[test]
    fn benzene_bonds_all_aromatic() {
        let g = parse_smiles("c1ccccc1").unwrap();
        let v = build_views(&g, None, &vocab(), 256, 2).unwrap();
        assert!(v.bonds.iter().all(|b| b.type_idx == bond_type_index(crate::chem::BondOrder::Aromatic)));
        let a = v.adjacency_dense();
        for i in 0..6 {
            assert_eq!(a[i][i], 0);
            for j in 0..6 {
                assert_eq!(a[i][j], a[j][i]);
            }
        }
    }

    #[test]
    fn misaligned_coords_rejected() {
        let g = parse_smiles("CCO").unwrap();
        let coords = [[0.0; 3]; 2];
        assert_eq!(
            build_views(&g, Some(&coords), &vocab(), 256, 2),
            Err(FeaturizeError::Alignment { expected: 3, found: 2 })
        );
    }

    #[test]
    fn build_views_is_pure() {
        let g = parse_smiles("CC(=O)Oc1ccccc1C(=O)O").unwrap();
        let v = vocab();
        let a = build_views(&g, None, &v, 512, 2).unwrap();
        let b = build_views(&g, None, &v, 512, 2).unwrap();
        assert_eq!(a, b);
        let ja = serde_json::to_string(&a).unwrap();
        let jb = serde_json::to_string(&b).unwrap();
        assert_eq!(ja, jb);
    }

    #[test]
    fn unknown_element_maps_to_unk() {
        let g = parse_smiles("[Se]([H])[H]").unwrap();
        let v = build_views(&g, None, &vocab(), 256, 2).unwrap();
        assert_eq!(v.atom_feats[0][0], ATOM_TYPE_UNK);
        assert_eq!(v.atom_feats[1][0], atom_type_index("H"));
    }

    #[test]
    fn views_json_roundtrip_preserves_f64_bits() {
        let g = parse_smiles("CCO").unwrap();
        let coords = [[0.1 + 0.2, 1.0 / 3.0, f64::MIN_POSITIVE], [1e300, -1e-300, 0.0], [2.5, 3.5, -4.5]];
        let v = build_views(&g, Some(&coords), &vocab(), 256, 2).unwrap();
        let j = serde_json::to_string(&v).unwrap();
        let back: MolViews = serde_json::from_str(&j).unwrap();
        assert_eq!(back, v);
        let (a, b) = (v.positions.unwrap(), back.positions.unwrap());
        for (x, y) in a.iter().flatten().zip(b.iter().flatten()) {
            assert_eq!(x.to_bits(), y.to_bits());
        }
    }
}
