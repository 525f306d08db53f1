//! Element-symbol vocabulary shared by the graph encoders.

use std::collections::BTreeMap;
use std::fs;
use std::io;
use std::path::Path;

use thiserror::Error;

use super::MolGraph;

pub const UNK_ATOM: usize = 0;

#[derive(Debug, Error)]
#[error("element {symbol:?} not in the atom vocabulary")]
pub struct UnknownAtomError {
    pub symbol: String,
}

/// Stable symbol-to-index map. Index 0 is reserved for unseen elements at
/// inference time; the remaining symbols are numbered in sorted order, so
/// the mapping is independent of molecule order. Aromatic and aliphatic
/// forms share one entry because atoms store the canonical element symbol.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct AtomVocab {
    index: BTreeMap<String, usize>,
}

impl AtomVocab {
    pub fn build<'a>(graphs: impl IntoIterator<Item = &'a MolGraph>) -> Self {
        let mut symbols: Vec<String> = graphs
            .into_iter()
            .flat_map(|g| g.atoms.iter().map(|a| a.element.clone()))
            .collect();
        symbols.sort();
        symbols.dedup();
        let index = symbols
            .into_iter()
            .enumerate()
            .map(|(i, s)| (s, i + 1))
            .collect();
        Self { index }
    }

    /// Number of rows an embedding table needs (symbols plus the UNK slot).
    pub fn size(&self) -> usize {
        self.index.len() + 1
    }

    /// Index of a symbol, falling back to the UNK slot.
    pub fn index_of(&self, symbol: &str) -> usize {
        self.index.get(symbol).copied().unwrap_or(UNK_ATOM)
    }

    pub fn contains(&self, symbol: &str) -> bool {
        self.index.contains_key(symbol)
    }

    /// Atom indices for a molecule. During training unseen elements are an
    /// error; at inference they map to UNK.
    pub fn ids_for(&self, mol: &MolGraph, strict: bool) -> Result<Vec<usize>, UnknownAtomError> {
        mol.atoms
            .iter()
            .map(|a| {
                if strict && !self.contains(&a.element) {
                    Err(UnknownAtomError {
                        symbol: a.element.clone(),
                    })
                } else {
                    Ok(self.index_of(&a.element))
                }
            })
            .collect()
    }

    pub fn save(&self, path: &Path) -> io::Result<()> {
        let mut out = String::from("<unk>\t0\n");
        for (symbol, id) in &self.index {
            out.push_str(&format!("{symbol}\t{id}\n"));
        }
        fs::write(path, out)
    }

    pub fn load(path: &Path) -> io::Result<Self> {
        let text = fs::read_to_string(path)?;
        let mut index = BTreeMap::new();
        for line in text.lines() {
            let mut parts = line.split('\t');
            let (Some(symbol), Some(id)) = (parts.next(), parts.next()) else {
                return Err(io::Error::new(
                    io::ErrorKind::InvalidData,
                    format!("bad vocabulary line {line:?}"),
                ));
            };
            if symbol == "<unk>" {
                continue;
            }
            let id: usize = id.parse().map_err(|_| {
                io::Error::new(io::ErrorKind::InvalidData, format!("bad id in {line:?}"))
            })?;
            index.insert(symbol.to_string(), id);
        }
        Ok(Self { index })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::smiles::parse_smiles;

    #[test]
    fn sorted_indices_with_unk_zero() {
        let a = parse_smiles("CO").unwrap();
        let b = parse_smiles("OC").unwrap();
        let vocab = AtomVocab::build([&a, &b]);
        assert_eq!(vocab.size(), 3);
        assert_eq!(vocab.index_of("C"), 1);
        assert_eq!(vocab.index_of("O"), 2);
        assert_eq!(vocab.index_of("Zr"), UNK_ATOM);
    }

    #[test]
    fn aromatic_and_aliphatic_share_an_index() {
        let benzene = parse_smiles("c1ccccc1").unwrap();
        let aspirin = parse_smiles("CC(=O)Oc1ccccc1C(=O)O").unwrap();
        let vocab = AtomVocab::build([&benzene, &aspirin]);
        let ids_aromatic = vocab.ids_for(&benzene, true).unwrap();
        assert!(ids_aromatic.iter().all(|&i| i == vocab.index_of("C")));
    }

    #[test]
    fn strict_mode_rejects_unseen_elements() {
        let train = parse_smiles("CCO").unwrap();
        let vocab = AtomVocab::build([&train]);
        let salt = parse_smiles("[Na+].[Cl-]").unwrap();
        assert!(vocab.ids_for(&salt, true).is_err());
        assert_eq!(vocab.ids_for(&salt, false).unwrap(), vec![UNK_ATOM, UNK_ATOM]);
    }
}
