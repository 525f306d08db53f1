//! Seeded random SMILES strings for synthetic datasets and property tests.
//!
//! Output stays inside the parser's grammar subset by construction: trees of
//! organic-subset atoms with branches, explicit bond decorations and
//! self-contained ring templates.

use crate::tensor::EngineRng;

#[derive(Debug, Clone)]
pub struct GeneratorOptions {
    pub min_atoms: usize,
    pub max_atoms: usize,
    /// Allow ring templates (including aromatic rings).
    pub rings: bool,
    /// `Some(true)` guarantees at least one nitrogen; `Some(false)` excludes
    /// nitrogen entirely; `None` leaves it to chance.
    pub nitrogen: Option<bool>,
}

impl Default for GeneratorOptions {
    fn default() -> Self {
        Self {
            min_atoms: 1,
            max_atoms: 12,
            rings: true,
            nitrogen: None,
        }
    }
}

/// A random molecule with default options.
pub fn random_smiles(rng: &mut EngineRng) -> String {
    random_smiles_with(rng, &GeneratorOptions::default())
}

pub fn random_smiles_with(rng: &mut EngineRng, opts: &GeneratorOptions) -> String {
    let target = opts.min_atoms + rng.index(opts.max_atoms - opts.min_atoms + 1);
    let mut out = String::new();
    let mut atoms_left = target;
    let mut ring_digit = 1u32;

    // Guaranteed nitrogen goes first so later choices stay unconstrained.
    if opts.nitrogen == Some(true) {
        out.push('N');
        atoms_left = atoms_left.saturating_sub(1);
    } else {
        out.push_str(atom_symbol(rng, opts));
        atoms_left = atoms_left.saturating_sub(1);
    }

    while atoms_left > 0 {
        let roll = rng.index(10);
        if opts.rings && ring_digit <= 9 && atoms_left >= 6 && roll == 0 {
            out.push_str(&ring_template(rng, opts, ring_digit));
            ring_digit += 1;
            atoms_left -= 6;
        } else if roll <= 2 && atoms_left >= 2 {
            // branch with a short tail
            out.push('(');
            out.push_str(bond_symbol(rng));
            out.push_str(atom_symbol(rng, opts));
            out.push(')');
            out.push_str(atom_symbol(rng, opts));
            atoms_left -= 2;
        } else {
            out.push_str(bond_symbol(rng));
            out.push_str(atom_symbol(rng, opts));
            atoms_left -= 1;
        }
    }
    out
}

fn atom_symbol<'a>(rng: &mut EngineRng, opts: &GeneratorOptions) -> &'a str {
    const WITH_N: [&str; 8] = ["C", "C", "C", "N", "O", "S", "Cl", "F"];
    const WITHOUT_N: [&str; 8] = ["C", "C", "C", "O", "O", "S", "Cl", "F"];
    let table: &[&str; 8] = if opts.nitrogen == Some(false) {
        &WITHOUT_N
    } else {
        &WITH_N
    };
    table[rng.index(8)]
}

fn bond_symbol<'a>(rng: &mut EngineRng) -> &'a str {
    match rng.index(6) {
        0 => "=",
        1 => "#",
        _ => "",
    }
}

/// Six-membered ring attached to the current atom. The digit is fresh per
/// call so templates never collide.
fn ring_template(rng: &mut EngineRng, opts: &GeneratorOptions, digit: u32) -> String {
    let aromatic_n_ok = opts.nitrogen != Some(false);
    let body = match rng.index(3) {
        0 => "C9CCCCC9".to_string(),
        1 => "c9ccccc9".to_string(),
        _ if aromatic_n_ok => "c9ccncc9".to_string(),
        _ => "c9ccccc9".to_string(),
    };
    body.replace('9', &digit.to_string())
}
