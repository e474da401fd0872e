//! Shared helpers for the integration and acceptance suites: reference-dump
//! parsing, parser-vs-reference comparison, and toy dataset generators.

#![allow(dead_code)]

use molfuse::chem::{parse_smiles, BondOrder, Parity};
use molfuse::util::seeded_rng;
use rand::Rng;
use std::path::{Path, PathBuf};

pub fn fixture_path(name: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("tests/fixtures").join(name)
}

#[derive(Debug, PartialEq)]
pub struct RefAtom {
    pub symbol: String,
    pub charge: i8,
    pub hcount: u8,
    pub aromatic: bool,
    pub isotope: u16,
    pub parity: String,
}

#[derive(Debug)]
pub struct RefMol {
    pub idx: usize,
    pub smiles: String,
    pub atoms: Vec<RefAtom>,
    /// (a, b, order label) with a < b.
    pub bonds: Vec<(usize, usize, String)>,
    pub ring_sizes: Vec<usize>,
    pub components: usize,
}

/// Parse the recorded reference dump.
pub fn load_reference(path: &Path) -> Vec<RefMol> {
    let text = std::fs::read_to_string(path).expect("read reference dump");
    let mut mols: Vec<RefMol> = Vec::new();
    for line in text.lines() {
        let parts: Vec<&str> = line.split('\t').collect();
        match parts[0] {
            "mol" => {
                let rings = parts[5].strip_prefix("rings=").unwrap();
                let ring_sizes = if rings == "-" {
                    Vec::new()
                } else {
                    rings.split(',').map(|s| s.parse().unwrap()).collect()
                };
                mols.push(RefMol {
                    idx: parts[1].parse().unwrap(),
                    smiles: parts[2].to_string(),
                    atoms: Vec::new(),
                    bonds: Vec::new(),
                    ring_sizes,
                    components: parts[6].strip_prefix("components=").unwrap().parse().unwrap(),
                });
            }
            "atom" => {
                let m = mols.last_mut().unwrap();
                m.atoms.push(RefAtom {
                    symbol: parts[2].to_string(),
                    charge: parts[3].parse().unwrap(),
                    hcount: parts[4].parse().unwrap(),
                    aromatic: parts[5] == "1",
                    isotope: parts[6].parse().unwrap(),
                    parity: parts[7].to_string(),
                });
            }
            "bond" => {
                let m = mols.last_mut().unwrap();
                let a: usize = parts[1].parse().unwrap();
                let b: usize = parts[2].parse().unwrap();
                m.bonds.push((a.min(b), a.max(b), parts[3].to_string()));
            }
            _ => panic!("unexpected dump line: {line}"),
        }
    }
    mols
}

fn order_label(o: BondOrder) -> &'static str {
    match o {
        BondOrder::Single => "single",
        BondOrder::Double => "double",
        BondOrder::Triple => "triple",
        BondOrder::Aromatic => "aromatic",
    }
}

fn parity_label(p: Parity) -> &'static str {
    match p {
        Parity::None => "-",
        Parity::Ccw => "@",
        Parity::Cw => "@@",
    }
}

/// Parse one reference molecule with the crate's parser and compare atoms,
/// bonds, parity, hydrogen counts, ring identity, and ring sizes.
pub fn compare_with_reference(rm: &RefMol) -> Result<(), String> {
    let g = parse_smiles(&rm.smiles).map_err(|e| format!("{}: parse failed: {e}", rm.smiles))?;
    if g.atoms.len() != rm.atoms.len() {
        return Err(format!("{}: {} atoms vs reference {}", rm.smiles, g.atoms.len(), rm.atoms.len()));
    }
    let adj = g.adjacency();
    for (i, (a, r)) in g.atoms.iter().zip(&rm.atoms).enumerate() {
        if a.element != r.symbol {
            return Err(format!("{}: atom {i} element {} vs {}", rm.smiles, a.element, r.symbol));
        }
        if a.formal_charge != r.charge {
            return Err(format!("{}: atom {i} charge {} vs {}", rm.smiles, a.formal_charge, r.charge));
        }
        if a.implicit_h != r.hcount {
            return Err(format!("{}: atom {i} hcount {} vs {}", rm.smiles, a.implicit_h, r.hcount));
        }
        if a.aromatic != r.aromatic {
            return Err(format!("{}: atom {i} aromatic {} vs {}", rm.smiles, a.aromatic, r.aromatic));
        }
        if a.isotope.unwrap_or(0) != r.isotope {
            return Err(format!("{}: atom {i} isotope mismatch", rm.smiles));
        }
        if parity_label(a.parity) != r.parity {
            return Err(format!(
                "{}: atom {i} parity {} vs {}",
                rm.smiles,
                parity_label(a.parity),
                r.parity
            ));
        }
        let _ = adj;
    }
    let mut got_bonds: Vec<(usize, usize, String)> = g
        .bonds
        .iter()
        .map(|b| (b.a.min(b.b), b.a.max(b.b), order_label(b.order).to_string()))
        .collect();
    got_bonds.sort();
    let mut want_bonds = rm.bonds.clone();
    want_bonds.sort();
    if got_bonds != want_bonds {
        return Err(format!("{}: bond list mismatch\n got {got_bonds:?}\nwant {want_bonds:?}", rm.smiles));
    }
    // ring identity |SSSR| = |E| − |V| + components
    let expected_rank = g.bonds.len() + g.components() - g.atoms.len();
    if g.rings.len() != expected_rank {
        return Err(format!("{}: {} rings vs rank {expected_rank}", rm.smiles, g.rings.len()));
    }
    if g.components() != rm.components {
        return Err(format!("{}: components {} vs {}", rm.smiles, g.components(), rm.components));
    }
    let mut sizes: Vec<usize> = g.rings.iter().map(Vec::len).collect();
    sizes.sort_unstable();
    if sizes != rm.ring_sizes {
        return Err(format!("{}: ring sizes {sizes:?} vs {:?}", rm.smiles, rm.ring_sizes));
    }
    Ok(())
}

// ---- toy data generation ----

/// Ring/chain template library for synthetic corpora. Every entry parses and
/// has a distinct scaffold.
pub const RING_TEMPLATES: [&str; 10] = [
    "c1ccccc1",
    "c1ccncc1",
    "c1ccoc1",
    "c1ccsc1",
    "c1cc[nH]c1",
    "C1CCCCC1",
    "C1CCCC1",
    "C1CCNCC1",
    "C1CCOCC1",
    "c1ccc2ccccc2c1",
];

/// `n` molecules with `1000`-scale distinct scaffolds: two ring systems from
/// the template library joined by a variable-length chain.
pub fn scaffold_rich_corpus(n: usize) -> Vec<String> {
    let mut out = Vec::with_capacity(n);
    let mut k = 0;
    'outer: for linker in 0.. {
        for a in 0..RING_TEMPLATES.len() {
            for b in 0..RING_TEMPLATES.len() {
                if k == n {
                    break 'outer;
                }
                let chain: String = std::iter::repeat_n('C', linker).collect();
                out.push(format!("{}{}{}", RING_TEMPLATES[a], chain, RING_TEMPLATES[b]));
                k += 1;
            }
        }
    }
    out
}

/// Small drug-like corpus for training smoke tests: `n` entries cycling
/// through substituted templates with chains.
pub fn toy_training_corpus(n: usize) -> Vec<String> {
    let bases = [
        "CCO", "CCN", "CCS", "CCCl", "CC(C)O", "CC(=O)O", "CC(=O)N", "CCOC",
        "c1ccccc1", "Cc1ccccc1", "Oc1ccccc1", "Nc1ccccc1", "c1ccncc1", "Cc1ccncc1",
        "c1ccoc1", "c1ccsc1", "CC(=O)Oc1ccccc1", "COc1ccccc1", "CCc1ccccc1", "OCCO",
    ];
    (0..n)
        .map(|i| {
            let base = bases[i % bases.len()];
            let tail: String = std::iter::repeat_n('C', i / bases.len()).collect();
            if tail.is_empty() {
                base.to_string()
            } else {
                format!("{tail}{base}")
            }
        })
        .collect()
}

/// Deterministic synthetic coordinates for a molecule: a jittered chain
/// layout, seeded per molecule index. Not physical, just well-spread points.
pub fn toy_coords(n_atoms: usize, seed: u64, index: usize) -> Vec<[f64; 3]> {
    let mut rng = seeded_rng(seed, &format!("toycoords.{index}"));
    (0..n_atoms)
        .map(|k| {
            [
                k as f64 * 1.5 + rng.random_range(-0.3..0.3),
                rng.random_range(-1.5..1.5),
                rng.random_range(-1.5..1.5),
            ]
        })
        .collect()
}

/// Molecules with 0–3 aromatic rings for the ring-count probe study.
pub fn ring_count_corpus(n: usize) -> Vec<String> {
    let zero = ["CCCCC", "CCOCC", "CC(C)CC", "CCNCC", "C1CCCCC1", "CCCCCCC"];
    let one = ["c1ccccc1", "Cc1ccccc1", "CCc1ccccc1", "Oc1ccccc1", "c1ccncc1", "c1ccoc1"];
    let two = [
        "c1ccc2ccccc2c1",
        "c1ccccc1-c1ccccc1",
        "c1ccccc1Cc1ccccc1",
        "c1ccccc1CCc1ccncc1",
        "Cc1ccc2ccccc2c1",
    ];
    let three = [
        "c1ccc2cc3ccccc3cc2c1",
        "c1ccccc1-c1ccc(-c2ccccc2)cc1",
        "c1ccccc1Cc1ccccc1Cc1ccccc1",
    ];
    (0..n)
        .map(|i| {
            let family = i % 4;
            let pick = i / 4;
            match family {
                0 => zero[pick % zero.len()].to_string(),
                1 => one[pick % one.len()].to_string(),
                2 => two[pick % two.len()].to_string(),
                _ => three[pick % three.len()].to_string(),
            }
        })
        .collect()
}

/// Write a CSV + conformer directory for a toy dataset under `dir`.
pub fn write_toy_dataset(
    dir: &Path,
    name: &str,
    smiles: &[String],
    labels: &[Vec<Option<f64>>],
    label_names: &[&str],
    conformers: bool,
) -> (PathBuf, Option<PathBuf>) {
    let csv_path = dir.join(format!("{name}.csv"));
    let mut text = String::from("smiles");
    for l in label_names {
        text.push(',');
        text.push_str(l);
    }
    text.push('\n');
    for (s, row) in smiles.iter().zip(labels) {
        text.push_str(s);
        for v in row {
            text.push(',');
            if let Some(v) = v {
                text.push_str(&v.to_string());
            }
        }
        text.push('\n');
    }
    std::fs::write(&csv_path, text).unwrap();

    let conf_dir = if conformers {
        let cd = dir.join(format!("{name}_conf"));
        std::fs::create_dir_all(&cd).unwrap();
        for (i, s) in smiles.iter().enumerate() {
            let g = parse_smiles(s).unwrap();
            let mut frames = String::new();
            for c in 0..2 {
                let coords = toy_coords(g.n_atoms(), 7 + c, i);
                let frame = molfuse::featurize::XyzFrame {
                    elements: g.atoms.iter().map(|a| a.element.clone()).collect(),
                    coords,
                };
                frames.push_str(&molfuse::featurize::write_xyz_frame(&frame, &format!("conformer {c}")));
            }
            std::fs::write(cd.join(format!("{i}.xyz")), frames).unwrap();
        }
        Some(cd)
    } else {
        None
    };
    (csv_path, conf_dir)
}
