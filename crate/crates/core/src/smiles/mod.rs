//! SMILES parsing into molecular graphs.
//!
//! The grammar subset covers what the graph encoders consume: organic-subset
//! and bracket atoms, branches, ring closures (including `%nn`), dots and
//! explicit bond symbols. Stereochemistry is read and discarded; hydrogens
//! stay implicit and never become nodes. There is no valence checking or
//! kekulization — aromaticity is taken syntactically, and a defaulted bond
//! between two aromatic atoms becomes aromatic exactly when it lies on a
//! ring (i.e. it is not a bridge of the final graph).

pub mod generator;
mod parser;
mod vocab;

pub use vocab::{AtomVocab, UnknownAtomError};

use thiserror::Error;

/// The four bond types the models distinguish.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum BondType {
    Single,
    Double,
    Triple,
    Aromatic,
}

impl BondType {
    pub const ALL: [BondType; 4] = [
        BondType::Single,
        BondType::Double,
        BondType::Triple,
        BondType::Aromatic,
    ];

    pub fn index(self) -> usize {
        match self {
            BondType::Single => 0,
            BondType::Double => 1,
            BondType::Triple => 2,
            BondType::Aromatic => 3,
        }
    }
}

/// A heavy atom: canonical element symbol plus aromaticity and formal charge.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Atom {
    pub element: String,
    pub aromatic: bool,
    pub charge: i32,
}

/// Undirected typed edge between two distinct atom indices.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Bond {
    pub a: usize,
    pub b: usize,
    pub kind: BondType,
}

/// Molecular graph: atoms in left-to-right encounter order, bonds without
/// duplicates. The graph may be disconnected (salt forms written with `.`).
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct MolGraph {
    pub atoms: Vec<Atom>,
    pub bonds: Vec<Bond>,
}

impl MolGraph {
    pub fn atom_count(&self) -> usize {
        self.atoms.len()
    }

    pub fn bond_count(&self) -> usize {
        self.bonds.len()
    }

    pub fn aromatic_bond_count(&self) -> usize {
        self.bonds.iter().filter(|b| b.kind == BondType::Aromatic).count()
    }

    /// Neighbor lists as `(atom index, bond type)`, in bond declaration order.
    pub fn adjacency(&self) -> Vec<Vec<(usize, BondType)>> {
        let mut adj = vec![Vec::new(); self.atoms.len()];
        for bond in &self.bonds {
            adj[bond.a].push((bond.b, bond.kind));
            adj[bond.b].push((bond.a, bond.kind));
        }
        adj
    }

    pub fn degree(&self, atom: usize) -> usize {
        self.bonds
            .iter()
            .filter(|b| b.a == atom || b.b == atom)
            .count()
    }

    pub fn contains_element(&self, symbol: &str) -> bool {
        self.atoms.iter().any(|a| a.element == symbol)
    }

    /// Rebuild the graph under a node relabeling: new index of old atom `i`
    /// is `perm[i]`.
    pub fn relabel(&self, perm: &[usize]) -> MolGraph {
        assert_eq!(perm.len(), self.atoms.len());
        let mut atoms = vec![
            Atom {
                element: String::new(),
                aromatic: false,
                charge: 0
            };
            self.atoms.len()
        ];
        for (old, &new) in perm.iter().enumerate() {
            atoms[new] = self.atoms[old].clone();
        }
        let bonds = self
            .bonds
            .iter()
            .map(|b| Bond {
                a: perm[b.a],
                b: perm[b.b],
                kind: b.kind,
            })
            .collect();
        MolGraph { atoms, bonds }
    }
}

/// Byte offset plus failure kind for every rejected input.
#[derive(Debug, Clone, PartialEq, Eq, Error)]
#[error("{kind} at byte {offset}")]
pub struct SmilesError {
    pub kind: SmilesErrorKind,
    pub offset: usize,
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum SmilesErrorKind {
    #[error("empty input")]
    EmptyInput,
    #[error("unclosed branch parenthesis")]
    UnclosedBranch,
    #[error("branch close without matching open")]
    UnmatchedBranchClose,
    #[error("unmatched ring-closure digit at end of input")]
    UnmatchedRingClosure,
    #[error("unknown element symbol {0:?}")]
    UnknownElement(String),
    #[error("charge outside brackets")]
    ChargeWithoutBracket,
    #[error("empty brackets")]
    EmptyBrackets,
    #[error("unclosed bracket atom")]
    UnclosedBracket,
    #[error("unexpected character {0:?}")]
    UnexpectedCharacter(char),
    #[error("bond symbol with no atom to attach")]
    DanglingBond,
    #[error("ring closure bond symbols disagree")]
    RingBondConflict,
    #[error("ring closure would bond an atom to itself")]
    RingSelfBond,
    #[error("duplicate bond between the same atoms")]
    DuplicateBond,
    #[error("`%` ring closure needs two digits")]
    BadRingNumber,
    #[error("nesting depth limit exceeded")]
    DepthLimitExceeded,
    #[error("aromatic atom has no aromatic bond")]
    AromaticAtomWithoutRing,
}

/// Nesting guards; exceeding either is a parse error, not a crash.
#[derive(Debug, Clone, Copy)]
pub struct ParserLimits {
    pub max_branch_depth: usize,
    pub max_open_rings: usize,
}

impl Default for ParserLimits {
    fn default() -> Self {
        Self {
            max_branch_depth: 100,
            max_open_rings: 100,
        }
    }
}

/// Parse a SMILES string with default limits.
pub fn parse_smiles(text: &str) -> Result<MolGraph, SmilesError> {
    parser::parse(text, ParserLimits::default())
}

/// Parse with explicit nesting limits.
pub fn parse_smiles_with_limits(text: &str, limits: ParserLimits) -> Result<MolGraph, SmilesError> {
    parser::parse(text, limits)
}

/// Build the vocabulary of element symbols over a set of parsed molecules.
pub fn atom_vocabulary<'a>(graphs: impl IntoIterator<Item = &'a MolGraph>) -> AtomVocab {
    AtomVocab::build(graphs)
}
