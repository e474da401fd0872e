//! Organic-subset SMILES parser.
//!
//! Aromaticity comes straight from the notation: lowercase atoms are flagged
//! aromatic, an elided bond between two aromatic atoms is an aromatic bond.
//! Implicit hydrogens are filled from fixed default valences (B3, C4, N3, O2,
//! P3/5, S2/4/6, halogens 1); an aromatic atom donates one valence slot to the
//! ring system before hydrogens are added. Bracket atoms use their written
//! hydrogen count verbatim.

use super::periodic::{atomic_number, valence_targets};
use super::rings::sssr;
use super::{Atom, Bond, BondDir, BondOrder, MolGraph, ParseError, Parity};
use std::collections::BTreeMap;

#[derive(Clone, Copy)]
struct PendingBond {
    order: Option<BondOrder>,
    direction: BondDir,
    pos: usize,
}

struct RingOpen {
    atom: usize,
    bond: Option<PendingBond>,
    pos: usize,
}

struct Parser {
    chars: Vec<(usize, char)>,
    i: usize,
    atoms: Vec<Atom>,
    bonds: Vec<Bond>,
    bond_pos: Vec<usize>,
    /// Bracket atoms carry their hydrogen count explicitly.
    bracketed: Vec<bool>,
    prev: Option<usize>,
    stack: Vec<usize>,
    pending: Option<PendingBond>,
    ring_open: BTreeMap<u16, RingOpen>,
}

fn syntax(pos: usize, msg: impl Into<String>) -> ParseError {
    ParseError::Syntax { pos, msg: msg.into() }
}

fn unsupported(pos: usize, what: impl Into<String>) -> ParseError {
    ParseError::Unsupported { pos, what: what.into() }
}

/// Parse a SMILES string into a [`MolGraph`] with rings resolved, aromatic
/// flags set, implicit hydrogens computed, and SSSR populated.
pub fn parse_smiles(s: &str) -> Result<MolGraph, ParseError> {
    let mut p = Parser {
        chars: s.char_indices().collect(),
        i: 0,
        atoms: Vec::new(),
        bonds: Vec::new(),
        bond_pos: Vec::new(),
        bracketed: Vec::new(),
        prev: None,
        stack: Vec::new(),
        pending: None,
        ring_open: BTreeMap::new(),
    };
    p.run()?;
    p.finish(s)
}

impl Parser {
    fn peek(&self) -> Option<char> {
        self.chars.get(self.i).map(|&(_, c)| c)
    }

    fn pos(&self) -> usize {
        self.chars
            .get(self.i)
            .map_or_else(|| self.chars.last().map_or(0, |&(p, c)| p + c.len_utf8()), |&(p, _)| p)
    }

    fn bump(&mut self) -> Option<char> {
        let c = self.peek();
        if c.is_some() {
            self.i += 1;
        }
        c
    }

    fn run(&mut self) -> Result<(), ParseError> {
        if self.chars.is_empty() {
            return Err(syntax(0, "empty SMILES"));
        }
        while let Some(c) = self.peek() {
            let pos = self.pos();
            match c {
                '(' => {
                    self.bump();
                    if self.pending.is_some() {
                        return Err(syntax(pos, "bond symbol before branch open"));
                    }
                    match self.prev {
                        Some(a) => self.stack.push(a),
                        None => return Err(syntax(pos, "branch before any atom")),
                    }
                }
                ')' => {
                    self.bump();
                    if self.pending.is_some() {
                        return Err(syntax(pos, "dangling bond before branch close"));
                    }
                    match self.stack.pop() {
                        Some(a) => self.prev = Some(a),
                        None => return Err(syntax(pos, "unmatched ')'")),
                    }
                }
                '-' | '=' | '#' | ':' | '/' | '\\' => {
                    self.bump();
                    if self.pending.is_some() {
                        return Err(syntax(pos, "two bond symbols in a row"));
                    }
                    let (order, direction) = match c {
                        '-' => (Some(BondOrder::Single), BondDir::None),
                        '=' => (Some(BondOrder::Double), BondDir::None),
                        '#' => (Some(BondOrder::Triple), BondDir::None),
                        ':' => (Some(BondOrder::Aromatic), BondDir::None),
                        '/' => (Some(BondOrder::Single), BondDir::Up),
                        _ => (Some(BondOrder::Single), BondDir::Down),
                    };
                    self.pending = Some(PendingBond { order, direction, pos });
                }
                '0'..='9' => {
                    self.bump();
                    let num = c.to_digit(10).unwrap() as u16;
                    self.ring_bond(num, pos)?;
                }
                '%' => {
                    self.bump();
                    let mut num = 0u16;
                    for _ in 0..2 {
                        match self.peek() {
                            Some(d) if d.is_ascii_digit() => {
                                num = num * 10 + d.to_digit(10).unwrap() as u16;
                                self.bump();
                            }
                            _ => return Err(syntax(pos, "'%' requires two digits")),
                        }
                    }
                    self.ring_bond(num, pos)?;
                }
                '[' => {
                    self.bump();
                    let atom = self.read_bracket(pos)?;
                    self.add_atom(atom, true, pos)?;
                }
                '.' => return Err(unsupported(pos, "disconnected components ('.')")),
                '*' => return Err(unsupported(pos, "wildcard atom ('*')")),
                '>' => return Err(unsupported(pos, "reaction arrow ('>')")),
                '~' => return Err(unsupported(pos, "any-bond ('~')")),
                '$' => return Err(unsupported(pos, "quadruple bond ('$')")),
                _ => {
                    let atom = self.read_organic(pos)?;
                    self.add_atom(atom, false, pos)?;
                }
            }
        }
        Ok(())
    }

    fn read_organic(&mut self, pos: usize) -> Result<Atom, ParseError> {
        let c = self.bump().unwrap();
        let (symbol, aromatic): (String, bool) = match c {
            'C' if self.peek() == Some('l') => {
                self.bump();
                ("Cl".into(), false)
            }
            'B' if self.peek() == Some('r') => {
                self.bump();
                ("Br".into(), false)
            }
            'B' | 'C' | 'N' | 'O' | 'P' | 'S' | 'F' | 'I' => (c.to_string(), false),
            'b' | 'c' | 'n' | 'o' | 'p' | 's' => (c.to_uppercase().to_string(), true),
            'H' => return Err(syntax(pos, "hydrogen must be written as a bracket atom")),
            _ => return Err(syntax(pos, format!("unexpected character '{c}'"))),
        };
        let z = atomic_number(&symbol).expect("organic subset element");
        Ok(Atom {
            element: symbol,
            atomic_number: z,
            formal_charge: 0,
            implicit_h: 0,
            aromatic,
            parity: Parity::None,
            isotope: None,
            index: 0,
        })
    }

    fn read_bracket(&mut self, open_pos: usize) -> Result<Atom, ParseError> {
        // isotope
        let mut isotope: Option<u16> = None;
        while let Some(d) = self.peek().filter(char::is_ascii_digit) {
            let v = isotope.unwrap_or(0);
            if v > 999 {
                return Err(syntax(self.pos(), "isotope out of range"));
            }
            isotope = Some(v * 10 + d.to_digit(10).unwrap() as u16);
            self.bump();
        }
        // element symbol
        let sym_pos = self.pos();
        let first = self
            .bump()
            .ok_or_else(|| syntax(open_pos, "unterminated bracket atom"))?;
        let (symbol, aromatic) = match first {
            '*' => return Err(unsupported(sym_pos, "wildcard atom ('*')")),
            'a'..='z' => {
                // aromatic bracket symbols: b c n o p s se as
                let two: String = match (first, self.peek()) {
                    ('s', Some('e')) | ('a', Some('s')) => {
                        let mut t = first.to_string();
                        t.push(self.bump().unwrap());
                        t
                    }
                    _ => first.to_string(),
                };
                let upper = {
                    let mut u = two.to_string();
                    u[..1].make_ascii_uppercase();
                    u
                };
                match two.as_str() {
                    "b" | "c" | "n" | "o" | "p" | "s" | "se" | "as" => (upper, true),
                    _ => return Err(syntax(sym_pos, format!("unknown aromatic symbol '{two}'"))),
                }
            }
            'A'..='Z' => {
                let mut sym = first.to_string();
                if let Some(lo) = self.peek().filter(char::is_ascii_lowercase) {
                    let mut two = sym.clone();
                    two.push(lo);
                    if atomic_number(&two).is_some() {
                        self.bump();
                        sym = two;
                    }
                }
                (sym, false)
            }
            _ => return Err(syntax(sym_pos, format!("unexpected character '{first}' in bracket atom"))),
        };
        let z = atomic_number(&symbol)
            .ok_or_else(|| unsupported(sym_pos, format!("unknown element '{symbol}'")))?;

        // chirality
        let mut parity = Parity::None;
        if self.peek() == Some('@') {
            let at_pos = self.pos();
            self.bump();
            if self.peek() == Some('@') {
                self.bump();
                parity = Parity::Cw;
            } else if matches!(self.peek(), Some('T') | Some('A') | Some('S') | Some('O')) {
                return Err(unsupported(at_pos, "extended chirality class"));
            } else {
                parity = Parity::Ccw;
            }
        }

        // hydrogen count
        let mut hcount: u8 = 0;
        if self.peek() == Some('H') {
            self.bump();
            hcount = 1;
            if let Some(d) = self.peek().filter(char::is_ascii_digit) {
                hcount = d.to_digit(10).unwrap() as u8;
                self.bump();
            }
        }

        // charge
        let mut charge: i8 = 0;
        if let Some(sign @ ('+' | '-')) = self.peek() {
            let sign_pos = self.pos();
            self.bump();
            let unit: i8 = if sign == '+' { 1 } else { -1 };
            charge = unit;
            if let Some(d) = self.peek().filter(char::is_ascii_digit) {
                self.bump();
                charge = unit * d.to_digit(10).unwrap() as i8;
            } else {
                while self.peek() == Some(sign) {
                    self.bump();
                    charge = charge
                        .checked_add(unit)
                        .ok_or_else(|| syntax(sign_pos, "charge out of range"))?;
                }
            }
        }

        match self.peek() {
            Some(']') => {
                self.bump();
            }
            Some(':') => return Err(unsupported(self.pos(), "atom class (':n')")),
            Some(c) => {
                return Err(syntax(
                    self.pos(),
                    format!("unexpected character '{c}' in bracket atom"),
                ))
            }
            None => return Err(syntax(open_pos, "unterminated bracket atom")),
        }

        Ok(Atom {
            element: symbol,
            atomic_number: z,
            formal_charge: charge,
            implicit_h: hcount,
            aromatic,
            parity,
            isotope,
            index: 0,
        })
    }

    fn add_atom(&mut self, mut atom: Atom, bracketed: bool, pos: usize) -> Result<(), ParseError> {
        atom.index = self.atoms.len();
        let idx = atom.index;
        self.atoms.push(atom);
        self.bracketed.push(bracketed);
        if let Some(prev) = self.prev {
            let pending = self.pending.take();
            self.make_bond(prev, idx, pending, pos)?;
        } else if let Some(p) = self.pending.take() {
            return Err(syntax(p.pos, "bond symbol before any atom"));
        }
        self.prev = Some(idx);
        Ok(())
    }

    fn ring_bond(&mut self, num: u16, pos: usize) -> Result<(), ParseError> {
        let prev = match self.prev {
            Some(p) => p,
            None => return Err(syntax(pos, "ring closure before any atom")),
        };
        let pending = self.pending.take();
        if let Some(open) = self.ring_open.remove(&num) {
            if open.atom == prev {
                return Err(syntax(pos, format!("ring bond {num} closes on its own atom")));
            }
            let bond = match (open.bond, pending) {
                (Some(a), Some(b)) => {
                    if a.order != b.order {
                        return Err(syntax(pos, format!("conflicting orders for ring bond {num}")));
                    }
                    Some(a)
                }
                (Some(a), None) => Some(a),
                (None, b) => b,
            };
            self.make_bond(open.atom, prev, bond, pos)
        } else {
            self.ring_open.insert(num, RingOpen { atom: prev, bond: pending, pos });
            Ok(())
        }
    }

    fn make_bond(
        &mut self,
        a: usize,
        b: usize,
        pending: Option<PendingBond>,
        pos: usize,
    ) -> Result<(), ParseError> {
        if self
            .bonds
            .iter()
            .any(|x| (x.a, x.b) == (a, b) || (x.a, x.b) == (b, a))
        {
            return Err(syntax(pos, format!("duplicate bond between atoms {a} and {b}")));
        }
        let (order, direction) = match pending {
            Some(p) => (p.order.unwrap(), p.direction),
            None => {
                let order = if self.atoms[a].aromatic && self.atoms[b].aromatic {
                    BondOrder::Aromatic
                } else {
                    BondOrder::Single
                };
                (order, BondDir::None)
            }
        };
        if order == BondOrder::Aromatic && !(self.atoms[a].aromatic && self.atoms[b].aromatic) {
            return Err(syntax(pos, "aromatic bond between non-aromatic atoms"));
        }
        self.bonds.push(Bond { a, b, order, direction });
        self.bond_pos.push(pos);
        Ok(())
    }

    fn finish(mut self, source: &str) -> Result<MolGraph, ParseError> {
        if let Some(p) = self.pending {
            return Err(syntax(p.pos, "dangling bond at end of input"));
        }
        if !self.stack.is_empty() {
            let end = source.len();
            return Err(syntax(end, "unmatched '('"));
        }
        if let Some((num, open)) = self.ring_open.iter().next() {
            return Err(syntax(open.pos, format!("unclosed ring bond {num}")));
        }

        // implicit hydrogens for non-bracket atoms
        let mut valence = vec![0u8; self.atoms.len()];
        for bond in &self.bonds {
            valence[bond.a] = valence[bond.a].saturating_add(bond.order.valence());
            valence[bond.b] = valence[bond.b].saturating_add(bond.order.valence());
        }
        for (i, atom) in self.atoms.iter_mut().enumerate() {
            if self.bracketed[i] {
                continue;
            }
            let v = valence[i];
            let sub = valence_targets(atom.atomic_number)
                .iter()
                .find(|&&t| t >= v)
                .map_or(0, |&t| t - v);
            atom.implicit_h = if atom.aromatic { sub.saturating_sub(1) } else { sub };
        }

        let rings = sssr(self.atoms.len(), &self.bonds);
        Ok(MolGraph {
            atoms: self.atoms,
            bonds: self.bonds,
            rings,
            source_smiles: source.to_string(),
        })
    }
}
