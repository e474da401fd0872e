//! Emits the parser reference dump for the corpus, using `purr` (an
//! independent OpenSMILES reader) as the oracle for atoms, bonds, hydrogen
//! counts, and parity tags. Ring lines are filled in afterwards by
//! `ring_oracle.py` (networkx minimum cycle basis).
//!
//! Usage: fixturegen <corpus.smi> <out.tsv>
//!
//! Notes on normalization:
//! - purr inverts a tetrahedral tag while building its adjacency graph for
//!   every non-root atom that carries a hydrogen count; the dump undoes that
//!   inversion so tags match the source notation.
//! - elided bonds are resolved to aromatic when both endpoints are aromatic,
//!   single otherwise (the standard reading).

use purr::feature::{AtomKind, BondKind, BracketSymbol, Configuration};
use purr::graph::{Atom, Builder};
use purr::read::read;
use std::fmt::Write as _;

fn main() {
    let args: Vec<String> = std::env::args().collect();
    if args.len() != 3 {
        eprintln!("usage: fixturegen <corpus.smi> <out.tsv>");
        std::process::exit(2);
    }
    let corpus = std::fs::read_to_string(&args[1]).expect("read corpus");
    let mut out = String::new();
    let mut idx = 0usize;
    for (lineno, line) in corpus.lines().enumerate() {
        let smiles = line.trim();
        if smiles.is_empty() || smiles.starts_with('#') {
            continue;
        }
        let mut builder = Builder::new();
        if let Err(e) = read(smiles, &mut builder, None) {
            eprintln!("line {}: purr rejects {smiles:?}: {e:?}", lineno + 1);
            std::process::exit(1);
        }
        let graph = match builder.build() {
            Ok(g) => g,
            Err(e) => {
                eprintln!("line {}: purr graph error for {smiles:?}: {e:?}", lineno + 1);
                std::process::exit(1);
            }
        };
        emit(&mut out, idx, smiles, &graph);
        idx += 1;
    }
    std::fs::write(&args[2], out).expect("write fixture");
    eprintln!("wrote {} molecules", idx);
}

fn emit(out: &mut String, idx: usize, smiles: &str, graph: &[Atom]) {
    let n_bonds: usize = graph.iter().map(|a| a.bonds.len()).sum::<usize>() / 2;
    writeln!(out, "mol\t{idx}\t{smiles}\tatoms={}\tbonds={n_bonds}\trings=?\tcomponents=?", graph.len()).unwrap();
    for (i, atom) in graph.iter().enumerate() {
        let (symbol, aromatic) = symbol_of(&atom.kind);
        let charge = charge_of(&atom.kind);
        let isotope = isotope_of(&atom.kind);
        let hcount = atom.suppressed_hydrogens();
        let parity = parity_of(&atom.kind, i);
        writeln!(
            out,
            "atom\t{i}\t{symbol}\t{charge}\t{hcount}\t{}\t{isotope}\t{parity}",
            u8::from(aromatic)
        )
        .unwrap();
    }
    for (i, atom) in graph.iter().enumerate() {
        for bond in &atom.bonds {
            let j = bond.tid;
            if j < i {
                continue;
            }
            let order = match bond.kind {
                BondKind::Single | BondKind::Up | BondKind::Down => "single",
                BondKind::Double => "double",
                BondKind::Triple => "triple",
                BondKind::Aromatic => "aromatic",
                BondKind::Elided => {
                    if graph[i].is_aromatic() && graph[j].is_aromatic() {
                        "aromatic"
                    } else {
                        "single"
                    }
                }
                BondKind::Quadruple => panic!("quadruple bond in corpus"),
            };
            writeln!(out, "bond\t{i}\t{j}\t{order}").unwrap();
        }
    }
}

fn symbol_of(kind: &AtomKind) -> (String, bool) {
    match kind {
        AtomKind::Star => panic!("star atom in corpus"),
        AtomKind::Aliphatic(a) => (a.to_string(), false),
        AtomKind::Aromatic(a) => (a.to_string().to_uppercase(), true),
        AtomKind::Bracket { symbol, .. } => match symbol {
            BracketSymbol::Star => panic!("star atom in corpus"),
            BracketSymbol::Element(e) => (e.to_string(), false),
            BracketSymbol::Aromatic(a) => {
                let s = a.to_string();
                let mut u = s.clone();
                u[..1].make_ascii_uppercase();
                (u, true)
            }
        },
    }
}

fn charge_of(kind: &AtomKind) -> i8 {
    match kind {
        AtomKind::Bracket { charge: Some(c), .. } => c.into(),
        _ => 0,
    }
}

fn isotope_of(kind: &AtomKind) -> u16 {
    match kind {
        AtomKind::Bracket { isotope: Some(n), .. } => n.into(),
        _ => 0,
    }
}

/// Tetrahedral tag as written in the source. The builder inverted tags of
/// non-root atoms with a hydrogen count; undo exactly that.
fn parity_of(kind: &AtomKind, index: usize) -> &'static str {
    let AtomKind::Bracket { configuration: Some(conf), hcount, .. } = kind else {
        return "-";
    };
    let stored_ccw = match conf {
        Configuration::TH1 => true,
        Configuration::TH2 => false,
        other => panic!("unexpected configuration {other:?} in corpus"),
    };
    let h: u8 = hcount.as_ref().map_or(0, |h| h.into());
    let was_inverted = index != 0 && h > 0;
    let written_ccw = stored_ccw != was_inverted;
    if written_ccw {
        "@"
    } else {
        "@@"
    }
}
