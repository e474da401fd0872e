//! Element symbol table for the parser. Covers the organic subset plus the
//! elements that show up in drug-like bracket atoms.

const ELEMENTS: &[(&str, u8)] = &[
    ("H", 1),
    ("He", 2),
    ("Li", 3),
    ("Be", 4),
    ("B", 5),
    ("C", 6),
    ("N", 7),
    ("O", 8),
    ("F", 9),
    ("Ne", 10),
    ("Na", 11),
    ("Mg", 12),
    ("Al", 13),
    ("Si", 14),
    ("P", 15),
    ("S", 16),
    ("Cl", 17),
    ("Ar", 18),
    ("K", 19),
    ("Ca", 20),
    ("Ti", 22),
    ("Cr", 24),
    ("Mn", 25),
    ("Fe", 26),
    ("Co", 27),
    ("Ni", 28),
    ("Cu", 29),
    ("Zn", 30),
    ("Ga", 31),
    ("Ge", 32),
    ("As", 33),
    ("Se", 34),
    ("Br", 35),
    ("Kr", 36),
    ("Rb", 37),
    ("Sr", 38),
    ("Mo", 42),
    ("Ru", 44),
    ("Rh", 45),
    ("Pd", 46),
    ("Ag", 47),
    ("Cd", 48),
    ("In", 49),
    ("Sn", 50),
    ("Sb", 51),
    ("Te", 52),
    ("I", 53),
    ("Xe", 54),
    ("Cs", 55),
    ("Ba", 56),
    ("W", 74),
    ("Pt", 78),
    ("Au", 79),
    ("Hg", 80),
    ("Tl", 81),
    ("Pb", 82),
    ("Bi", 83),
];

/// Atomic number for an element symbol, or `None` if unknown.
pub fn atomic_number(symbol: &str) -> Option<u8> {
    ELEMENTS.iter().find(|(s, _)| *s == symbol).map(|&(_, z)| z)
}

/// Symbol for an atomic number, or `None` if outside the table.
pub fn element_symbol(z: u8) -> Option<&'static str> {
    ELEMENTS.iter().find(|&&(_, n)| n == z).map(|&(s, _)| s)
}

/// Default valence targets used for implicit-hydrogen filling, smallest first.
/// Elements without an entry never receive implicit hydrogens.
pub fn valence_targets(z: u8) -> &'static [u8] {
    match z {
        5 => &[3],          // B
        6 => &[4],          // C
        7 => &[3],          // N
        8 => &[2],          // O
        15 => &[3, 5],      // P
        16 => &[2, 4, 6],   // S
        9 | 17 | 35 | 53 => &[1], // F Cl Br I
        _ => &[],
    }
}
