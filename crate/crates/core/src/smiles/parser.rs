//! The SMILES state machine and post-parse bond resolution.

use std::collections::{BTreeMap, HashSet};

use super::{Atom, Bond, BondType, MolGraph, ParserLimits, SmilesError, SmilesErrorKind};

/// All element symbols accepted inside brackets (and the organic subset
/// outside them). Unknowns are rejected with their spelling in the error.
const ELEMENTS: &[&str] = &[
    "H", "He", "Li", "Be", "B", "C", "N", "O", "F", "Ne", "Na", "Mg", "Al", "Si", "P", "S", "Cl",
    "Ar", "K", "Ca", "Sc", "Ti", "V", "Cr", "Mn", "Fe", "Co", "Ni", "Cu", "Zn", "Ga", "Ge", "As",
    "Se", "Br", "Kr", "Rb", "Sr", "Y", "Zr", "Nb", "Mo", "Tc", "Ru", "Rh", "Pd", "Ag", "Cd", "In",
    "Sn", "Sb", "Te", "I", "Xe", "Cs", "Ba", "La", "Ce", "Pr", "Nd", "Pm", "Sm", "Eu", "Gd", "Tb",
    "Dy", "Ho", "Er", "Tm", "Yb", "Lu", "Hf", "Ta", "W", "Re", "Os", "Ir", "Pt", "Au", "Hg", "Tl",
    "Pb", "Bi", "Po", "At", "Rn", "Fr", "Ra", "Ac", "Th", "Pa", "U", "Np", "Pu", "Am", "Cm", "Bk",
    "Cf", "Es", "Fm", "Md", "No", "Lr", "Rf", "Db", "Sg", "Bh", "Hs", "Mt", "Ds", "Rg", "Cn",
    "Nh", "Fl", "Mc", "Lv", "Ts", "Og",
];

fn known_element(symbol: &str) -> bool {
    ELEMENTS.contains(&symbol)
}

/// Aromatic lowercase forms allowed in brackets, mapped to their element.
fn bracket_aromatic(symbol: &str) -> Option<&'static str> {
    match symbol {
        "b" => Some("B"),
        "c" => Some("C"),
        "n" => Some("N"),
        "o" => Some("O"),
        "p" => Some("P"),
        "s" => Some("S"),
        "se" => Some("Se"),
        "as" => Some("As"),
        "te" => Some("Te"),
        _ => None,
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Pending {
    Single,
    Double,
    Triple,
    Aromatic,
}

impl Pending {
    fn bond_type(self) -> BondType {
        match self {
            Pending::Single => BondType::Single,
            Pending::Double => BondType::Double,
            Pending::Triple => BondType::Triple,
            Pending::Aromatic => BondType::Aromatic,
        }
    }
}

/// Bond whose type may still depend on ring membership.
#[derive(Debug, Clone, Copy)]
enum WorkKind {
    Explicit(BondType),
    Unspecified,
}

struct RingOpen {
    atom: usize,
    bond: Option<Pending>,
    offset: usize,
}

struct Parser<'a> {
    bytes: &'a [u8],
    pos: usize,
    atoms: Vec<Atom>,
    atom_offsets: Vec<usize>,
    bonds: Vec<(usize, usize, WorkKind)>,
    edges: HashSet<(usize, usize)>,
    prev: Option<usize>,
    branch_stack: Vec<(usize, usize)>,
    pending: Option<(Pending, usize)>,
    rings: BTreeMap<u32, RingOpen>,
    limits: ParserLimits,
}

pub(super) fn parse(text: &str, limits: ParserLimits) -> Result<MolGraph, SmilesError> {
    Parser {
        bytes: text.as_bytes(),
        pos: 0,
        atoms: Vec::new(),
        atom_offsets: Vec::new(),
        bonds: Vec::new(),
        edges: HashSet::new(),
        prev: None,
        branch_stack: Vec::new(),
        pending: None,
        rings: BTreeMap::new(),
        limits,
    }
    .run()
}

impl Parser<'_> {
    fn fail(&self, kind: SmilesErrorKind, offset: usize) -> SmilesError {
        SmilesError { kind, offset }
    }

    fn peek(&self) -> Option<u8> {
        self.bytes.get(self.pos).copied()
    }

    fn run(mut self) -> Result<MolGraph, SmilesError> {
        if self.bytes.is_empty() {
            return Err(self.fail(SmilesErrorKind::EmptyInput, 0));
        }
        while let Some(c) = self.peek() {
            let at = self.pos;
            match c {
                b'(' => {
                    let Some(prev) = self.prev else {
                        return Err(self.fail(SmilesErrorKind::UnexpectedCharacter('('), at));
                    };
                    if self.branch_stack.len() >= self.limits.max_branch_depth {
                        return Err(self.fail(SmilesErrorKind::DepthLimitExceeded, at));
                    }
                    self.branch_stack.push((prev, at));
                    self.pos += 1;
                }
                b')' => {
                    if let Some((_, off)) = self.pending {
                        return Err(self.fail(SmilesErrorKind::DanglingBond, off));
                    }
                    let Some((restore, _)) = self.branch_stack.pop() else {
                        return Err(self.fail(SmilesErrorKind::UnmatchedBranchClose, at));
                    };
                    self.prev = Some(restore);
                    self.pos += 1;
                }
                b'.' => {
                    if let Some((_, off)) = self.pending {
                        return Err(self.fail(SmilesErrorKind::DanglingBond, off));
                    }
                    self.prev = None;
                    self.pos += 1;
                }
                b'-' | b'/' | b'\\' => self.set_pending(Pending::Single, at)?,
                b'=' => self.set_pending(Pending::Double, at)?,
                b'#' => self.set_pending(Pending::Triple, at)?,
                b':' => self.set_pending(Pending::Aromatic, at)?,
                b'+' => return Err(self.fail(SmilesErrorKind::ChargeWithoutBracket, at)),
                b'0'..=b'9' => {
                    let digit = u32::from(c - b'0');
                    self.pos += 1;
                    self.ring_closure(digit, at)?;
                }
                b'%' => {
                    self.pos += 1;
                    let d1 = self.peek().filter(u8::is_ascii_digit);
                    self.pos += 1;
                    let d2 = self.peek().filter(u8::is_ascii_digit);
                    let (Some(d1), Some(d2)) = (d1, d2) else {
                        return Err(self.fail(SmilesErrorKind::BadRingNumber, at));
                    };
                    self.pos += 1;
                    let number = u32::from(d1 - b'0') * 10 + u32::from(d2 - b'0');
                    self.ring_closure(number, at)?;
                }
                b'[' => self.bracket_atom(at)?,
                b'A'..=b'Z' => self.organic_atom(at)?,
                b'b' | b'c' | b'n' | b'o' | b'p' | b's' => self.organic_atom(at)?,
                other => {
                    return Err(self.fail(
                        SmilesErrorKind::UnexpectedCharacter(char::from(other)),
                        at,
                    ))
                }
            }
        }
        if let Some((_, off)) = self.pending {
            return Err(self.fail(SmilesErrorKind::DanglingBond, off));
        }
        if let Some(&(_, off)) = self.branch_stack.first() {
            return Err(self.fail(SmilesErrorKind::UnclosedBranch, off));
        }
        if let Some(open) = self.rings.values().min_by_key(|o| o.offset) {
            return Err(self.fail(SmilesErrorKind::UnmatchedRingClosure, open.offset));
        }
        if self.atoms.is_empty() {
            return Err(self.fail(SmilesErrorKind::EmptyInput, 0));
        }
        self.finish()
    }

    fn set_pending(&mut self, bond: Pending, at: usize) -> Result<(), SmilesError> {
        if self.pending.is_some() {
            return Err(self.fail(SmilesErrorKind::DanglingBond, at));
        }
        self.pending = Some((bond, at));
        self.pos += 1;
        Ok(())
    }

    /// Append an atom and bond it to the current attachment point.
    fn add_atom(&mut self, atom: Atom, at: usize) -> Result<(), SmilesError> {
        let index = self.atoms.len();
        self.atoms.push(atom);
        self.atom_offsets.push(at);
        let pending = self.pending.take();
        match (self.prev, pending) {
            (Some(prev), bond) => {
                let kind = match bond {
                    Some((p, _)) => WorkKind::Explicit(p.bond_type()),
                    None => WorkKind::Unspecified,
                };
                self.push_bond(prev, index, kind, at)?;
            }
            (None, Some((_, off))) => {
                return Err(self.fail(SmilesErrorKind::DanglingBond, off));
            }
            (None, None) => {}
        }
        self.prev = Some(index);
        Ok(())
    }

    fn push_bond(
        &mut self,
        a: usize,
        b: usize,
        kind: WorkKind,
        at: usize,
    ) -> Result<(), SmilesError> {
        let key = (a.min(b), a.max(b));
        if !self.edges.insert(key) {
            return Err(self.fail(SmilesErrorKind::DuplicateBond, at));
        }
        self.bonds.push((a, b, kind));
        Ok(())
    }

    fn ring_closure(&mut self, number: u32, at: usize) -> Result<(), SmilesError> {
        let Some(here) = self.prev else {
            return Err(self.fail(SmilesErrorKind::UnexpectedCharacter(
                char::from_digit(number % 10, 10).unwrap_or('%'),
            ), at));
        };
        let pending = self.pending.take().map(|(p, _)| p);
        if let Some(open) = self.rings.remove(&number) {
            if open.atom == here {
                return Err(self.fail(SmilesErrorKind::RingSelfBond, at));
            }
            let kind = match (open.bond, pending) {
                (None, None) => WorkKind::Unspecified,
                (Some(p), None) | (None, Some(p)) => WorkKind::Explicit(p.bond_type()),
                (Some(p), Some(q)) if p == q => WorkKind::Explicit(p.bond_type()),
                (Some(_), Some(_)) => {
                    return Err(self.fail(SmilesErrorKind::RingBondConflict, at))
                }
            };
            self.push_bond(open.atom, here, kind, at)?;
        } else {
            if self.rings.len() >= self.limits.max_open_rings {
                return Err(self.fail(SmilesErrorKind::DepthLimitExceeded, at));
            }
            self.rings.insert(
                number,
                RingOpen {
                    atom: here,
                    bond: pending,
                    offset: at,
                },
            );
        }
        Ok(())
    }

    /// Organic-subset atom outside brackets: B, C, N, O, P, S, F, Cl, Br, I
    /// or aromatic b, c, n, o, p, s. `Cl`/`Br` take the two-letter reading.
    fn organic_atom(&mut self, at: usize) -> Result<(), SmilesError> {
        let c = self.bytes[self.pos];
        self.pos += 1;
        let (symbol, aromatic) = match c {
            b'C' if self.peek() == Some(b'l') => {
                self.pos += 1;
                ("Cl", false)
            }
            b'B' if self.peek() == Some(b'r') => {
                self.pos += 1;
                ("Br", false)
            }
            b'B' => ("B", false),
            b'C' => ("C", false),
            b'N' => ("N", false),
            b'O' => ("O", false),
            b'P' => ("P", false),
            b'S' => ("S", false),
            b'F' => ("F", false),
            b'I' => ("I", false),
            b'b' => ("B", true),
            b'c' => ("C", true),
            b'n' => ("N", true),
            b'o' => ("O", true),
            b'p' => ("P", true),
            b's' => ("S", true),
            other => {
                return Err(self.fail(
                    SmilesErrorKind::UnknownElement(char::from(other).to_string()),
                    at,
                ))
            }
        };
        self.add_atom(
            Atom {
                element: symbol.to_string(),
                aromatic,
                charge: 0,
            },
            at,
        )
    }

    /// Bracket atom: `[isotope? element chirality? Hcount? charge?]`.
    /// Isotope, chirality and explicit hydrogen counts parse and are
    /// discarded; charge is kept.
    fn bracket_atom(&mut self, open_at: usize) -> Result<(), SmilesError> {
        self.pos += 1; // consume '['
        if self.peek() == Some(b']') {
            return Err(self.fail(SmilesErrorKind::EmptyBrackets, open_at));
        }

        // isotope
        while self.peek().is_some_and(|c| c.is_ascii_digit()) {
            self.pos += 1;
        }

        // element, possibly an aromatic lowercase form
        let sym_at = self.pos;
        let mut symbol = String::new();
        let mut aromatic = false;
        match self.peek() {
            Some(c @ b'A'..=b'Z') => {
                symbol.push(char::from(c));
                self.pos += 1;
                if let Some(low @ b'a'..=b'z') = self.peek() {
                    let two: String = [char::from(c), char::from(low)].iter().collect();
                    // Prefer the two-letter element when it exists ([Cl-],
                    // [Na+]); single-letter elements followed by H or a
                    // chirality mark fall through ([CH4], [N@@H]).
                    if known_element(&two) {
                        symbol = two;
                        self.pos += 1;
                    }
                }
            }
            Some(c @ b'a'..=b'z') => {
                symbol.push(char::from(c));
                self.pos += 1;
                if let Some(low @ b'a'..=b'z') = self.peek() {
                    let two: String = [char::from(c), char::from(low)].iter().collect();
                    if bracket_aromatic(&two).is_some() {
                        symbol = two;
                        self.pos += 1;
                    }
                }
                match bracket_aromatic(&symbol) {
                    Some(canonical) => {
                        symbol = canonical.to_string();
                        aromatic = true;
                    }
                    None => {
                        return Err(self.fail(SmilesErrorKind::UnknownElement(symbol), sym_at))
                    }
                }
            }
            Some(b']') => return Err(self.fail(SmilesErrorKind::EmptyBrackets, open_at)),
            Some(other) => {
                return Err(self.fail(
                    SmilesErrorKind::UnexpectedCharacter(char::from(other)),
                    self.pos,
                ))
            }
            None => return Err(self.fail(SmilesErrorKind::UnclosedBracket, open_at)),
        }
        if !aromatic && !known_element(&symbol) {
            return Err(self.fail(SmilesErrorKind::UnknownElement(symbol), sym_at));
        }

        let mut charge: i32 = 0;
        loop {
            match self.peek() {
                Some(b'@') => self.pos += 1, // chirality, discarded
                Some(b'H') => {
                    // explicit hydrogen count, discarded
                    self.pos += 1;
                    while self.peek().is_some_and(|c| c.is_ascii_digit()) {
                        self.pos += 1;
                    }
                }
                Some(sign @ (b'+' | b'-')) => {
                    let unit: i32 = if sign == b'+' { 1 } else { -1 };
                    self.pos += 1;
                    if self.peek().is_some_and(|c| c.is_ascii_digit()) {
                        let mut magnitude = 0i32;
                        while let Some(d) = self.peek().filter(u8::is_ascii_digit) {
                            magnitude = magnitude * 10 + i32::from(d - b'0');
                            self.pos += 1;
                        }
                        charge += unit * magnitude;
                    } else {
                        charge += unit;
                    }
                }
                Some(b']') => {
                    self.pos += 1;
                    break;
                }
                Some(other) => {
                    return Err(self.fail(
                        SmilesErrorKind::UnexpectedCharacter(char::from(other)),
                        self.pos,
                    ))
                }
                None => return Err(self.fail(SmilesErrorKind::UnclosedBracket, open_at)),
            }
        }

        self.add_atom(
            Atom {
                element: symbol,
                aromatic,
                charge,
            },
            open_at,
        )
    }

    /// Resolve unspecified bonds and check the aromatic-atom invariant.
    fn finish(self) -> Result<MolGraph, SmilesError> {
        let bridges = bridge_edges(self.atoms.len(), &self.bonds);
        let bonds: Vec<Bond> = self
            .bonds
            .iter()
            .enumerate()
            .map(|(i, &(a, b, kind))| {
                let kind = match kind {
                    WorkKind::Explicit(k) => k,
                    WorkKind::Unspecified => {
                        if self.atoms[a].aromatic && self.atoms[b].aromatic && !bridges[i] {
                            BondType::Aromatic
                        } else {
                            BondType::Single
                        }
                    }
                };
                Bond { a, b, kind }
            })
            .collect();

        // Every aromatic-flagged atom must sit on at least one aromatic
        // bond; a lone aromatic atom (or one stranded outside any ring)
        // would otherwise violate the graph's own contract.
        let mut has_aromatic_bond = vec![false; self.atoms.len()];
        for bond in &bonds {
            if bond.kind == BondType::Aromatic {
                has_aromatic_bond[bond.a] = true;
                has_aromatic_bond[bond.b] = true;
            }
        }
        for (i, atom) in self.atoms.iter().enumerate() {
            if atom.aromatic && !has_aromatic_bond[i] {
                return Err(SmilesError {
                    kind: SmilesErrorKind::AromaticAtomWithoutRing,
                    offset: self.atom_offsets[i],
                });
            }
        }

        Ok(MolGraph {
            atoms: self.atoms,
            bonds,
        })
    }
}

/// Mark which edges are bridges (removing one disconnects its component).
/// Iterative low-link computation so pathological chains cannot overflow
/// the call stack.
fn bridge_edges(n: usize, bonds: &[(usize, usize, WorkKind)]) -> Vec<bool> {
    let mut adj: Vec<Vec<(usize, usize)>> = vec![Vec::new(); n];
    for (i, &(a, b, _)) in bonds.iter().enumerate() {
        adj[a].push((b, i));
        adj[b].push((a, i));
    }
    let mut disc = vec![usize::MAX; n];
    let mut low = vec![0usize; n];
    let mut bridge = vec![false; bonds.len()];
    let mut timer = 0usize;

    for root in 0..n {
        if disc[root] != usize::MAX {
            continue;
        }
        // frame: (node, incoming edge id, next adjacency index)
        let mut stack: Vec<(usize, Option<usize>, usize)> = vec![(root, None, 0)];
        disc[root] = timer;
        low[root] = timer;
        timer += 1;
        while let Some(&(v, in_edge, next)) = stack.last() {
            if next < adj[v].len() {
                stack.last_mut().expect("non-empty").2 += 1;
                let (w, edge) = adj[v][next];
                if Some(edge) == in_edge {
                    continue;
                }
                if disc[w] == usize::MAX {
                    disc[w] = timer;
                    low[w] = timer;
                    timer += 1;
                    stack.push((w, Some(edge), 0));
                } else {
                    low[v] = low[v].min(disc[w]);
                }
            } else {
                stack.pop();
                if let Some(&(parent, _, _)) = stack.last() {
                    low[parent] = low[parent].min(low[v]);
                    if low[v] > disc[parent] {
                        bridge[in_edge.expect("non-root frame has an incoming edge")] = true;
                    }
                }
            }
        }
    }
    bridge
}
