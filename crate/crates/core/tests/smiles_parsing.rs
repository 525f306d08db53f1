//! Golden-file parsing checks, error classes and structural invariants for
//! the SMILES parser.

use molfuse::smiles::{
    parse_smiles, parse_smiles_with_limits, BondType, MolGraph, ParserLimits, SmilesErrorKind,
};

fn golden_records() -> Vec<(String, usize, usize, usize)> {
    let text = include_str!("data/smiles_golden.tsv");
    text.lines()
        .map(|line| {
            let cols: Vec<&str> = line.split('\t').collect();
            assert_eq!(cols.len(), 4, "bad golden line {line:?}");
            (
                cols[0].to_string(),
                cols[1].parse().unwrap(),
                cols[2].parse().unwrap(),
                cols[3].parse().unwrap(),
            )
        })
        .collect()
}

#[test]
fn golden_suite_counts_match() {
    for (smiles, atoms, bonds, aromatic) in golden_records() {
        let mol = parse_smiles(&smiles).unwrap_or_else(|e| panic!("{smiles}: {e}"));
        assert_eq!(mol.atom_count(), atoms, "{smiles}: atom count");
        assert_eq!(mol.bond_count(), bonds, "{smiles}: bond count");
        assert_eq!(mol.aromatic_bond_count(), aromatic, "{smiles}: aromatic bonds");
    }
}

/// Token-level oracle: atoms equal atom tokens, bonds equal
/// (atom tokens - dot components) + ring-closure pairs.
#[test]
fn golden_suite_token_arithmetic() {
    for (smiles, ..) in golden_records() {
        let mut atom_tokens = 0usize;
        let mut components = 1usize;
        let mut ring_events = 0usize;
        let mut in_bracket = false;
        let mut bytes = smiles.bytes().peekable();
        while let Some(c) = bytes.next() {
            match c {
                b'[' => {
                    in_bracket = true;
                    atom_tokens += 1;
                }
                b']' => in_bracket = false,
                _ if in_bracket => {}
                b'.' => components += 1,
                b'%' => {
                    ring_events += 1;
                    bytes.next();
                    bytes.next();
                }
                b'0'..=b'9' => ring_events += 1,
                b'C' => {
                    atom_tokens += 1;
                    if bytes.peek() == Some(&b'l') {
                        bytes.next();
                    }
                }
                b'B' => {
                    atom_tokens += 1;
                    if bytes.peek() == Some(&b'r') {
                        bytes.next();
                    }
                }
                b'N' | b'O' | b'P' | b'S' | b'F' | b'I' => atom_tokens += 1,
                b'b' | b'c' | b'n' | b'o' | b'p' | b's' => atom_tokens += 1,
                _ => {}
            }
        }
        assert_eq!(ring_events % 2, 0, "{smiles}: unpaired ring digits");
        let mol = parse_smiles(&smiles).unwrap();
        assert_eq!(mol.atom_count(), atom_tokens, "{smiles}: token count");
        assert_eq!(
            mol.bond_count(),
            atom_tokens - components + ring_events / 2,
            "{smiles}: bond arithmetic"
        );
    }
}

#[test]
fn single_atom() {
    let mol = parse_smiles("C").unwrap();
    assert_eq!(mol.atom_count(), 1);
    assert_eq!(mol.bond_count(), 0);
    assert_eq!(mol.atoms[0].element, "C");
    assert!(!mol.atoms[0].aromatic);
}

#[test]
fn double_bond() {
    let mol = parse_smiles("C=O").unwrap();
    assert_eq!(mol.bonds[0].kind, BondType::Double);
}

#[test]
fn benzene_ring_closure() {
    let mol = parse_smiles("c1ccccc1").unwrap();
    assert_eq!(mol.atom_count(), 6);
    assert_eq!(mol.bond_count(), 6);
    assert!(mol.bonds.iter().all(|b| b.kind == BondType::Aromatic));
    assert!(mol.atoms.iter().all(|a| a.aromatic && a.element == "C"));
    // the closing bond joins the last atom back to the first
    assert!(mol.bonds.iter().any(|b| (b.a, b.b) == (0, 5) || (b.a, b.b) == (5, 0)));
}

#[test]
fn disconnected_salt_with_charges() {
    let mol = parse_smiles("[Na+].[Cl-]").unwrap();
    assert_eq!(mol.atom_count(), 2);
    assert_eq!(mol.bond_count(), 0);
    assert_eq!(mol.atoms[0].element, "Na");
    assert_eq!(mol.atoms[0].charge, 1);
    assert_eq!(mol.atoms[1].element, "Cl");
    assert_eq!(mol.atoms[1].charge, -1);
}

#[test]
fn numbered_charges_and_isotopes() {
    let mol = parse_smiles("[13C]").unwrap();
    assert_eq!(mol.atoms[0].element, "C");
    assert_eq!(mol.atoms[0].charge, 0);
    let mol = parse_smiles("[Fe+3]").unwrap();
    assert_eq!(mol.atoms[0].charge, 3);
    let mol = parse_smiles("[Ca++]").unwrap();
    assert_eq!(mol.atoms[0].charge, 2);
}

#[test]
fn explicit_bond_overrides_aromatic_default() {
    // biphenyl: the explicit '-' keeps the inter-ring bond single
    let mol = parse_smiles("c1ccccc1-c1ccccc1").unwrap();
    assert_eq!(mol.atom_count(), 12);
    assert_eq!(mol.aromatic_bond_count(), 12);
    let single: Vec<_> = mol.bonds.iter().filter(|b| b.kind == BondType::Single).collect();
    assert_eq!(single.len(), 1);
}

#[test]
fn unspecified_bond_between_aromatic_atoms_outside_ring_is_single() {
    // Same biphenyl without the explicit dash: the connecting bond is a
    // bridge, so it resolves to single, not aromatic.
    let mol = parse_smiles("c1ccccc1c1ccccc1").unwrap();
    assert_eq!(mol.aromatic_bond_count(), 12);
    assert_eq!(mol.bond_count(), 13);
}

#[test]
fn stereo_markers_read_as_single_bonds() {
    let mol = parse_smiles("C/C=C\\C").unwrap();
    let kinds: Vec<_> = mol.bonds.iter().map(|b| b.kind).collect();
    assert_eq!(kinds, [BondType::Single, BondType::Double, BondType::Single]);
}

#[test]
fn hydrogen_counts_never_become_nodes() {
    let mol = parse_smiles("[CH4]").unwrap();
    assert_eq!(mol.atom_count(), 1);
    let mol = parse_smiles("C([H])([H])=O").unwrap();
    // explicit [H] atoms are written as atoms, so they do count; only the
    // implicit H-count inside brackets is discarded
    assert_eq!(mol.atom_count(), 4);
}

// ── error classes ──────────────────────────────────────────────────────

fn kind_of(smiles: &str) -> (SmilesErrorKind, usize) {
    let err = parse_smiles(smiles).unwrap_err();
    (err.kind, err.offset)
}

#[test]
fn unclosed_branch_is_reported_at_the_paren() {
    let (kind, offset) = kind_of("CC(C");
    assert_eq!(kind, SmilesErrorKind::UnclosedBranch);
    assert_eq!(offset, 2);
}

#[test]
fn unmatched_ring_closure_is_reported_at_the_digit() {
    let (kind, offset) = kind_of("C1CC");
    assert_eq!(kind, SmilesErrorKind::UnmatchedRingClosure);
    assert_eq!(offset, 1);
}

#[test]
fn unknown_element_symbols() {
    let (kind, _) = kind_of("CQ");
    assert_eq!(kind, SmilesErrorKind::UnknownElement("Q".to_string()));
    let (kind, _) = kind_of("[Xx]");
    assert_eq!(kind, SmilesErrorKind::UnknownElement("X".to_string()));
}

#[test]
fn charge_without_bracket() {
    let (kind, offset) = kind_of("C+");
    assert_eq!(kind, SmilesErrorKind::ChargeWithoutBracket);
    assert_eq!(offset, 1);
}

#[test]
fn empty_brackets() {
    let (kind, offset) = kind_of("C[]C");
    assert_eq!(kind, SmilesErrorKind::EmptyBrackets);
    assert_eq!(offset, 1);
}

#[test]
fn further_error_classes() {
    assert_eq!(kind_of("").0, SmilesErrorKind::EmptyInput);
    assert_eq!(kind_of("C)C").0, SmilesErrorKind::UnmatchedBranchClose);
    assert_eq!(kind_of("C=").0, SmilesErrorKind::DanglingBond);
    assert_eq!(kind_of("C=.C").0, SmilesErrorKind::DanglingBond);
    assert_eq!(kind_of("C11").0, SmilesErrorKind::RingSelfBond);
    assert_eq!(kind_of("C=1CC#1").0, SmilesErrorKind::RingBondConflict);
    assert_eq!(kind_of("C12CC12").0, SmilesErrorKind::DuplicateBond);
    assert_eq!(kind_of("C%1C").0, SmilesErrorKind::BadRingNumber);
    assert_eq!(kind_of("[C").0, SmilesErrorKind::UnclosedBracket);
    assert_eq!(kind_of("C C").0, SmilesErrorKind::UnexpectedCharacter(' '));
    // a lone aromatic atom cannot sit on any aromatic bond
    assert_eq!(kind_of("c").0, SmilesErrorKind::AromaticAtomWithoutRing);
    assert_eq!(kind_of("cC").0, SmilesErrorKind::AromaticAtomWithoutRing);
}

#[test]
fn depth_limits_error_instead_of_crashing() {
    let limits = ParserLimits {
        max_branch_depth: 4,
        max_open_rings: 3,
    };
    let deep = "C".to_string() + &"(C".repeat(10);
    let err = parse_smiles_with_limits(&deep, limits).unwrap_err();
    assert_eq!(err.kind, SmilesErrorKind::DepthLimitExceeded);

    let many_rings = "C1C2C3C4C5";
    let err = parse_smiles_with_limits(many_rings, limits).unwrap_err();
    assert_eq!(err.kind, SmilesErrorKind::DepthLimitExceeded);

    // the default limit of 100 accepts ordinary nesting
    let ok = "C".to_string() + &"(C".repeat(50) + &")".repeat(50);
    parse_smiles(&ok).unwrap();
}

// ── invariants ─────────────────────────────────────────────────────────

fn check_invariants(mol: &MolGraph) {
    let n = mol.atom_count();
    let mut seen = std::collections::HashSet::new();
    for bond in &mol.bonds {
        assert!(bond.a < n && bond.b < n, "endpoint out of range");
        assert_ne!(bond.a, bond.b, "self bond");
        assert!(
            seen.insert((bond.a.min(bond.b), bond.a.max(bond.b))),
            "duplicate edge"
        );
    }
    for (i, atom) in mol.atoms.iter().enumerate() {
        if atom.aromatic {
            assert!(
                mol.bonds
                    .iter()
                    .any(|b| (b.a == i || b.b == i) && b.kind == BondType::Aromatic),
                "aromatic atom {i} without aromatic bond"
            );
        }
    }
}

#[test]
fn accepted_strings_satisfy_graph_invariants() {
    for (smiles, ..) in golden_records() {
        check_invariants(&parse_smiles(&smiles).unwrap());
    }
}

#[test]
fn parsing_is_deterministic() {
    for (smiles, ..) in golden_records() {
        let a = parse_smiles(&smiles).unwrap();
        let b = parse_smiles(&smiles).unwrap();
        assert_eq!(a, b);
    }
}

mod properties {
    use super::check_invariants;
    use molfuse::smiles::{generator, parse_smiles};
    use molfuse::tensor::EngineRng;
    use proptest::prelude::*;

    proptest! {
        /// Any generated molecule parses, satisfies the invariants and
        /// parses identically twice.
        #[test]
        fn generated_molecules_parse_and_are_stable(seed in 0u64..10_000) {
            let mut rng = EngineRng::from_seed(seed);
            let s = generator::random_smiles(&mut rng);
            let a = parse_smiles(&s).unwrap();
            check_invariants(&a);
            prop_assert_eq!(a, parse_smiles(&s).unwrap());
        }

        /// Arbitrary garbage either parses into a valid graph or fails with
        /// an error carrying an in-range byte offset; it never panics.
        #[test]
        fn parser_is_total_over_arbitrary_input(s in "[A-Za-z0-9\\[\\]()=#%+./\\\\-]{0,40}") {
            match parse_smiles(&s) {
                Ok(mol) => check_invariants(&mol),
                Err(e) => prop_assert!(e.offset <= s.len()),
            }
        }
    }
}
