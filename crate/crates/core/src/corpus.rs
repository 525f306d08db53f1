//! Corpus and drug-table ingestion: task XML to masked instance records,
//! mention-to-entry linking, pseudo-negative pair generation and the 4:1
//! split. Everything downstream is file-driven, so records serialize as
//! JSON lines and vocabularies as tab-separated text.

use std::collections::{BTreeSet, HashMap, HashSet};
use std::fs;
use std::io::{BufWriter, Write};
use std::path::Path;

use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::label::Label;
use crate::text::{
    build_position_features, tokenize, TextInstance, WordVocab, DRUG1_TOKEN, DRUG2_TOKEN,
    DRUGOTHER_TOKEN,
};
use crate::tensor::EngineRng;

#[derive(Debug, Error)]
pub enum CorpusError {
    #[error("corpus io: {0}")]
    Io(#[from] std::io::Error),
    #[error("xml: {0}")]
    Xml(String),
    #[error("entity {entity:?} has unusable charOffset {value:?}")]
    BadOffset { entity: String, value: String },
    #[error("pair {pair:?} references unknown entity {entity:?}")]
    UnknownEntity { pair: String, entity: String },
    #[error("pair {pair:?} carries unknown interaction type {value:?}")]
    UnknownLabel { pair: String, value: String },
    #[error("drug table line {line}: {reason}")]
    BadDrugTable { line: usize, reason: String },
    #[error("record {line}: {reason}")]
    BadRecord { line: usize, reason: String },
    #[error("requested {requested} negative pairs but only {feasible} are possible")]
    InfeasibleNegatives { requested: usize, feasible: usize },
}

// ── drug table ─────────────────────────────────────────────────────────

/// One database-style drug entry.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct DrugEntry {
    pub id: String,
    pub name: String,
    pub synonyms: Vec<String>,
    pub smiles: Option<String>,
}

/// Tab-separated surrogate for a licensed drug database:
/// `id<TAB>name<TAB>synonym;synonym<TAB>smiles` (the last two may be empty).
#[derive(Debug, Clone, Default)]
pub struct DrugTable {
    entries: Vec<DrugEntry>,
    by_id: HashMap<String, usize>,
}

impl DrugTable {
    pub fn load(path: &Path) -> Result<Self, CorpusError> {
        let text = fs::read_to_string(path)?;
        Self::parse(&text)
    }

    pub fn parse(text: &str) -> Result<Self, CorpusError> {
        let mut table = DrugTable::default();
        for (i, line) in text.lines().enumerate() {
            if line.trim().is_empty() {
                continue;
            }
            let cols: Vec<&str> = line.split('\t').collect();
            if cols.len() < 2 {
                return Err(CorpusError::BadDrugTable {
                    line: i + 1,
                    reason: "expected at least id and name".to_string(),
                });
            }
            let entry = DrugEntry {
                id: cols[0].to_string(),
                name: cols[1].to_string(),
                synonyms: cols
                    .get(2)
                    .map(|s| {
                        s.split(';')
                            .map(str::trim)
                            .filter(|s| !s.is_empty())
                            .map(str::to_string)
                            .collect()
                    })
                    .unwrap_or_default(),
                smiles: cols
                    .get(3)
                    .map(|s| s.trim())
                    .filter(|s| !s.is_empty())
                    .map(str::to_string),
            };
            if entry.name.is_empty() {
                return Err(CorpusError::BadDrugTable {
                    line: i + 1,
                    reason: format!("entry {:?} has an empty name", entry.id),
                });
            }
            if table.by_id.contains_key(&entry.id) {
                return Err(CorpusError::BadDrugTable {
                    line: i + 1,
                    reason: format!("duplicate id {:?}", entry.id),
                });
            }
            table.by_id.insert(entry.id.clone(), table.entries.len());
            table.entries.push(entry);
        }
        Ok(table)
    }

    pub fn get(&self, id: &str) -> Option<&DrugEntry> {
        self.by_id.get(id).map(|&i| &self.entries[i])
    }

    pub fn entries(&self) -> &[DrugEntry] {
        &self.entries
    }

    /// All ids in sorted order (the sampling universe).
    pub fn ids(&self) -> Vec<String> {
        let mut ids: Vec<String> = self.entries.iter().map(|e| e.id.clone()).collect();
        ids.sort();
        ids
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }
}

// ── task XML ───────────────────────────────────────────────────────────

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct EntityAnn {
    pub id: String,
    /// Character span, end exclusive.
    pub start: usize,
    pub end: usize,
    pub text: String,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PairAnn {
    pub id: String,
    pub e1: String,
    pub e2: String,
    pub label: Label,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SentenceAnn {
    pub id: String,
    pub text: String,
    pub entities: Vec<EntityAnn>,
    pub pairs: Vec<PairAnn>,
}

/// Parse one task XML document. Candidate pairs are exactly the annotated
/// `<pair>` elements; nothing is synthesized.
pub fn load_ddi_xml(xml: &str) -> Result<Vec<SentenceAnn>, CorpusError> {
    let doc = roxmltree::Document::parse(xml).map_err(|e| CorpusError::Xml(e.to_string()))?;
    let mut sentences = Vec::new();
    for node in doc.descendants().filter(|n| n.has_tag_name("sentence")) {
        let sentence_id = node.attribute("id").unwrap_or_default().to_string();
        let text = node.attribute("text").unwrap_or_default().to_string();
        let mut entities = Vec::new();
        let mut pairs = Vec::new();
        for child in node.children().filter(roxmltree::Node::is_element) {
            match child.tag_name().name() {
                "entity" => {
                    let id = child.attribute("id").unwrap_or_default().to_string();
                    let offsets = child.attribute("charOffset").unwrap_or_default();
                    let mention = child.attribute("text").unwrap_or_default().to_string();
                    // Discontinuous mentions ("a-b;c-d") keep their first span.
                    let first = offsets.split(';').next().unwrap_or_default();
                    let (start, end) = first.split_once('-').ok_or_else(|| {
                        CorpusError::BadOffset {
                            entity: id.clone(),
                            value: offsets.to_string(),
                        }
                    })?;
                    let parse = |s: &str| {
                        s.trim().parse::<usize>().map_err(|_| CorpusError::BadOffset {
                            entity: id.clone(),
                            value: offsets.to_string(),
                        })
                    };
                    let (start, end_inclusive) = (parse(start)?, parse(end)?);
                    entities.push(EntityAnn {
                        id,
                        start,
                        end: end_inclusive + 1,
                        text: mention,
                    });
                }
                "pair" => {
                    let id = child.attribute("id").unwrap_or_default().to_string();
                    let e1 = child.attribute("e1").unwrap_or_default().to_string();
                    let e2 = child.attribute("e2").unwrap_or_default().to_string();
                    let ddi = child.attribute("ddi").unwrap_or_default();
                    let label = if ddi.eq_ignore_ascii_case("true") {
                        let ty = child.attribute("type").unwrap_or_default();
                        Label::parse(ty).ok_or_else(|| CorpusError::UnknownLabel {
                            pair: id.clone(),
                            value: ty.to_string(),
                        })?
                    } else {
                        Label::Negative
                    };
                    pairs.push(PairAnn { id, e1, e2, label });
                }
                _ => {}
            }
        }
        sentences.push(SentenceAnn {
            id: sentence_id,
            text,
            entities,
            pairs,
        });
    }
    Ok(sentences)
}

// ── masking ────────────────────────────────────────────────────────────

/// Serialized form of a masked candidate pair (one JSON object per line).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InstanceRecord {
    pub pair_id: String,
    pub tokens: Vec<String>,
    pub drug1_index: usize,
    pub drug2_index: usize,
    pub label: Label,
    pub drug1_link: Option<String>,
    pub drug2_link: Option<String>,
}

impl InstanceRecord {
    /// Resolve tokens against a vocabulary and attach position features.
    pub fn featurize(&self, vocab: &WordVocab, clip: usize) -> Result<TextInstance, CorpusError> {
        let ok = self.tokens.get(self.drug1_index).map(String::as_str) == Some(DRUG1_TOKEN)
            && self.tokens.get(self.drug2_index).map(String::as_str) == Some(DRUG2_TOKEN)
            && self.tokens.iter().filter(|t| *t == DRUG1_TOKEN).count() == 1
            && self.tokens.iter().filter(|t| *t == DRUG2_TOKEN).count() == 1;
        if !ok {
            return Err(CorpusError::BadRecord {
                line: 0,
                reason: format!("instance {:?} lacks unique drug placeholders", self.pair_id),
            });
        }
        let token_ids = self.tokens.iter().map(|t| vocab.id(t)).collect();
        let (pos1_ids, pos2_ids) =
            build_position_features(self.tokens.len(), self.drug1_index, self.drug2_index, clip);
        Ok(TextInstance {
            pair_id: self.pair_id.clone(),
            token_ids,
            pos1_ids,
            pos2_ids,
            label: self.label,
            drug1_link: self.drug1_link.clone(),
            drug2_link: self.drug2_link.clone(),
        })
    }
}

#[derive(Debug, Default, Clone, Copy)]
pub struct MaskStats {
    pub pairs_total: usize,
    pub pairs_kept: usize,
    pub pairs_skipped: usize,
    pub mentions_total: usize,
    pub mentions_linked: usize,
}

impl MaskStats {
    pub fn link_rate(&self) -> f64 {
        if self.mentions_total == 0 {
            0.0
        } else {
            self.mentions_linked as f64 / self.mentions_total as f64
        }
    }
}

fn spans_overlap(a: (usize, usize), b: (usize, usize)) -> bool {
    a.0 < b.1 && b.0 < a.1
}

/// Mask one candidate pair. The earlier target mention becomes DRUG1, the
/// later DRUG2, every other mention DRUGOTHER; multi-word mentions collapse
/// to the single placeholder token. Overlapping mentions make the instance
/// unmaskable, which returns `Ok(None)` (the caller logs and skips).
pub fn mask_pair(
    sentence: &SentenceAnn,
    pair: &PairAnn,
) -> Result<Option<(Vec<String>, usize, usize)>, CorpusError> {
    let find = |id: &str| {
        sentence
            .entities
            .iter()
            .find(|e| e.id == id)
            .ok_or_else(|| CorpusError::UnknownEntity {
                pair: pair.id.clone(),
                entity: id.to_string(),
            })
    };
    let e1 = find(&pair.e1)?;
    let e2 = find(&pair.e2)?;
    // DRUG1 is the mention that appears first.
    let (first, second) = if e1.start <= e2.start { (e1, e2) } else { (e2, e1) };

    let chars: Vec<char> = sentence.text.chars().collect();
    let mut replacements: Vec<(usize, usize, &str)> = Vec::new();
    for entity in &sentence.entities {
        if entity.start >= entity.end || entity.end > chars.len() {
            return Err(CorpusError::BadOffset {
                entity: entity.id.clone(),
                value: format!("{}-{}", entity.start, entity.end),
            });
        }
        let token = if entity.id == first.id {
            DRUG1_TOKEN
        } else if entity.id == second.id {
            DRUG2_TOKEN
        } else {
            DRUGOTHER_TOKEN
        };
        replacements.push((entity.start, entity.end, token));
    }
    for (i, a) in replacements.iter().enumerate() {
        for b in replacements.iter().skip(i + 1) {
            if spans_overlap((a.0, a.1), (b.0, b.1)) {
                return Ok(None);
            }
        }
    }

    replacements.sort_by_key(|r| std::cmp::Reverse(r.0));
    let mut masked = chars;
    for (start, end, token) in replacements {
        let mut replacement: Vec<char> = vec![' '];
        replacement.extend(token.chars());
        replacement.push(' ');
        masked.splice(start..end, replacement);
    }
    let tokens = tokenize(&masked.into_iter().collect::<String>());
    let drug1_positions: Vec<usize> = tokens
        .iter()
        .enumerate()
        .filter(|(_, t)| *t == DRUG1_TOKEN)
        .map(|(i, _)| i)
        .collect();
    let drug2_positions: Vec<usize> = tokens
        .iter()
        .enumerate()
        .filter(|(_, t)| *t == DRUG2_TOKEN)
        .map(|(i, _)| i)
        .collect();
    // The raw text may itself contain a placeholder word; such instances
    // cannot satisfy the one-DRUG1/one-DRUG2 contract.
    if drug1_positions.len() != 1 || drug2_positions.len() != 1 {
        return Ok(None);
    }
    Ok(Some((tokens, drug1_positions[0], drug2_positions[0])))
}

/// Turn annotated sentences into instance records, linking each target
/// mention to the drug table when one is supplied.
pub fn build_instances(
    sentences: &[SentenceAnn],
    table: Option<&DrugTable>,
) -> Result<(Vec<InstanceRecord>, MaskStats), CorpusError> {
    let mut records = Vec::new();
    let mut stats = MaskStats::default();
    for sentence in sentences {
        for entity in &sentence.entities {
            stats.mentions_total += 1;
            if let Some(table) = table {
                if link_entity(&entity.text, table).is_some() {
                    stats.mentions_linked += 1;
                }
            }
        }
        for pair in &sentence.pairs {
            stats.pairs_total += 1;
            let Some((tokens, drug1_index, drug2_index)) = mask_pair(sentence, pair)? else {
                stats.pairs_skipped += 1;
                log::warn!(
                    "skipping pair {} in sentence {}: overlapping mentions",
                    pair.id,
                    sentence.id
                );
                continue;
            };
            stats.pairs_kept += 1;
            let link = |entity_id: &str| {
                let mention = sentence
                    .entities
                    .iter()
                    .find(|e| e.id == entity_id)
                    .map(|e| e.text.as_str())
                    .unwrap_or_default();
                table.and_then(|t| link_entity(mention, t))
            };
            // Links follow mention order, like the placeholders.
            let e1 = sentence.entities.iter().find(|e| e.id == pair.e1).expect("checked in mask");
            let e2 = sentence.entities.iter().find(|e| e.id == pair.e2).expect("checked in mask");
            let (first_id, second_id) = if e1.start <= e2.start {
                (&pair.e1, &pair.e2)
            } else {
                (&pair.e2, &pair.e1)
            };
            records.push(InstanceRecord {
                pair_id: pair.id.clone(),
                tokens,
                drug1_index,
                drug2_index,
                label: pair.label,
                drug1_link: link(first_id),
                drug2_link: link(second_id),
            });
        }
    }
    Ok((records, stats))
}

// ── linking ────────────────────────────────────────────────────────────

/// Length of the longest common substring.
fn lcs_length(a: &str, b: &str) -> usize {
    let a: Vec<char> = a.chars().collect();
    let b: Vec<char> = b.chars().collect();
    let mut prev = vec![0usize; b.len() + 1];
    let mut best = 0;
    for &ca in &a {
        let mut row = vec![0usize; b.len() + 1];
        for (j, &cb) in b.iter().enumerate() {
            if ca == cb {
                row[j + 1] = prev[j] + 1;
                best = best.max(row[j + 1]);
            }
        }
        prev = row;
    }
    best
}

const MIN_LINK_OVERLAP: usize = 3;

/// Link a mention to a drug entry: exact lowercase name or synonym match
/// wins; otherwise the entry with the longest common substring against any
/// of its names, provided the overlap reaches three characters. Ties take
/// the lexicographically smallest id.
pub fn link_entity(mention: &str, table: &DrugTable) -> Option<String> {
    let mention = mention.to_lowercase();
    if mention.is_empty() {
        return None;
    }
    let mut exact: Option<&str> = None;
    let mut best_len = 0usize;
    let mut best_id: Option<&str> = None;
    for entry in table.entries() {
        let names = std::iter::once(entry.name.as_str()).chain(entry.synonyms.iter().map(String::as_str));
        for name in names {
            let name = name.to_lowercase();
            if name == mention {
                exact = match exact {
                    Some(prev) if prev <= entry.id.as_str() => Some(prev),
                    _ => Some(&entry.id),
                };
            }
            let len = lcs_length(&mention, &name);
            let better = len > best_len
                || (len == best_len
                    && best_id.is_some_and(|prev| entry.id.as_str() < prev));
            if better {
                best_len = len;
                best_id = Some(&entry.id);
            }
        }
    }
    if let Some(id) = exact {
        return Some(id.to_string());
    }
    if best_len >= MIN_LINK_OVERLAP {
        return best_id.map(str::to_string);
    }
    None
}

// ── molecular pairs ────────────────────────────────────────────────────

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Provenance {
    Database,
    Generated,
}

/// An unordered drug pair with a binary interaction label.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PairRecord {
    pub drug1: String,
    pub drug2: String,
    pub positive: bool,
    pub provenance: Provenance,
}

impl PairRecord {
    pub fn key(&self) -> (String, String) {
        normalize_pair(&self.drug1, &self.drug2)
    }
}

pub fn normalize_pair(a: &str, b: &str) -> (String, String) {
    if a <= b {
        (a.to_string(), b.to_string())
    } else {
        (b.to_string(), a.to_string())
    }
}

/// Interaction list: `id1<TAB>id2` per line. Unknown ids are an error so a
/// mismatched table fails loudly.
pub fn read_interaction_pairs(path: &Path, table: &DrugTable) -> Result<Vec<PairRecord>, CorpusError> {
    let text = fs::read_to_string(path)?;
    let mut seen = BTreeSet::new();
    let mut pairs = Vec::new();
    for (i, line) in text.lines().enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        let Some((a, b)) = line.split_once('\t') else {
            return Err(CorpusError::BadRecord {
                line: i + 1,
                reason: "expected id1<TAB>id2".to_string(),
            });
        };
        let (a, b) = (a.trim(), b.trim());
        for id in [a, b] {
            if table.get(id).is_none() {
                return Err(CorpusError::BadRecord {
                    line: i + 1,
                    reason: format!("unknown drug id {id:?}"),
                });
            }
        }
        if a == b {
            return Err(CorpusError::BadRecord {
                line: i + 1,
                reason: format!("self pair {a:?}"),
            });
        }
        let key = normalize_pair(a, b);
        if seen.insert(key.clone()) {
            pairs.push(PairRecord {
                drug1: key.0,
                drug2: key.1,
                positive: true,
                provenance: Provenance::Database,
            });
        }
    }
    Ok(pairs)
}

/// Pseudo-negative pairs: `n` distinct unordered pairs drawn uniformly from
/// the universe, disjoint from the positive set and the exclusions.
pub fn generate_negative_pairs(
    positives: &[(String, String)],
    universe: &[String],
    n: usize,
    exclusions: &[(String, String)],
    seed: u64,
) -> Result<Vec<PairRecord>, CorpusError> {
    let mut ids: Vec<&str> = universe.iter().map(String::as_str).collect();
    ids.sort_unstable();
    ids.dedup();
    let index_of: HashMap<&str, usize> = ids.iter().enumerate().map(|(i, &s)| (s, i)).collect();

    let mut blocked: HashSet<(usize, usize)> = HashSet::new();
    for (a, b) in positives.iter().chain(exclusions) {
        if let (Some(&i), Some(&j)) = (index_of.get(a.as_str()), index_of.get(b.as_str())) {
            if i != j {
                blocked.insert((i.min(j), i.max(j)));
            }
        }
    }
    let total = ids.len() * ids.len().saturating_sub(1) / 2;
    let feasible = total - blocked.len();
    if n > feasible {
        return Err(CorpusError::InfeasibleNegatives {
            requested: n,
            feasible,
        });
    }

    let mut rng = EngineRng::derive(seed, "negative-pairs", 0);
    let mut chosen: Vec<(usize, usize)> = Vec::with_capacity(n);
    if total <= 2_000_000 {
        // Dense regime: enumerate the allowed pairs and take a shuffled prefix.
        let mut allowed: Vec<(usize, usize)> = Vec::with_capacity(feasible);
        for i in 0..ids.len() {
            for j in (i + 1)..ids.len() {
                if !blocked.contains(&(i, j)) {
                    allowed.push((i, j));
                }
            }
        }
        rng.shuffle(&mut allowed);
        chosen.extend(allowed.into_iter().take(n));
    } else {
        // Sparse regime: rejection sampling terminates quickly because the
        // blocked set is tiny relative to the pair space.
        let mut taken: HashSet<(usize, usize)> = HashSet::new();
        while chosen.len() < n {
            let i = rng.index(ids.len());
            let j = rng.index(ids.len());
            if i == j {
                continue;
            }
            let key = (i.min(j), i.max(j));
            if blocked.contains(&key) || !taken.insert(key) {
                continue;
            }
            chosen.push(key);
        }
    }

    Ok(chosen
        .into_iter()
        .map(|(i, j)| PairRecord {
            drug1: ids[i].to_string(),
            drug2: ids[j].to_string(),
            positive: false,
            provenance: Provenance::Generated,
        })
        .collect())
}

/// Stratified 4:1 split: each label class shuffles under the seed and cuts
/// at round(0.8 * len), so both sides stay within one of the exact ratio.
pub fn split_pairs(records: &[PairRecord], seed: u64) -> (Vec<PairRecord>, Vec<PairRecord>) {
    let mut train = Vec::new();
    let mut test = Vec::new();
    for (class, positive) in [("positive", true), ("negative", false)] {
        let mut members: Vec<&PairRecord> =
            records.iter().filter(|r| r.positive == positive).collect();
        let mut rng = EngineRng::derive(seed, "pair-split", crate::tensor::stable_hash(class));
        rng.shuffle(&mut members);
        let train_n = (members.len() * 4 + 2) / 5;
        for (i, record) in members.into_iter().enumerate() {
            if i < train_n {
                train.push(record.clone());
            } else {
                test.push(record.clone());
            }
        }
    }
    (train, test)
}

/// Unordered linked pairs carried by instances (used to exclude test-set
/// pairs from pseudo-negative sampling).
pub fn linked_pairs(records: &[InstanceRecord]) -> Vec<(String, String)> {
    let mut set = BTreeSet::new();
    for record in records {
        if let (Some(a), Some(b)) = (&record.drug1_link, &record.drug2_link) {
            if a != b {
                set.insert(normalize_pair(a, b));
            }
        }
    }
    set.into_iter().collect()
}

// ── record files ───────────────────────────────────────────────────────

pub fn write_jsonl<T: Serialize>(path: &Path, items: &[T]) -> Result<(), CorpusError> {
    let file = fs::File::create(path)?;
    let mut out = BufWriter::new(file);
    for item in items {
        serde_json::to_writer(&mut out, item)
            .map_err(|e| CorpusError::Xml(format!("serialize: {e}")))?;
        out.write_all(b"\n")?;
    }
    out.flush()?;
    Ok(())
}

pub fn read_jsonl<T: DeserializeOwned>(path: &Path) -> Result<Vec<T>, CorpusError> {
    let text = fs::read_to_string(path)?;
    text.lines()
        .enumerate()
        .filter(|(_, line)| !line.trim().is_empty())
        .map(|(i, line)| {
            serde_json::from_str(line).map_err(|e| CorpusError::BadRecord {
                line: i + 1,
                reason: e.to_string(),
            })
        })
        .collect()
}
