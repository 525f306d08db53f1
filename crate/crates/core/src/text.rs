//! Sentence-side model: tokenization, vocabulary, position features, the
//! multi-window convolutional encoder and the five-way classifier.
//!
//! Each token row is `[word embedding; position-1 embedding; position-2
//! embedding]`. Every window size convolves over zero-padded rows, relu
//! activations max-pool over positions, and the per-window filter vectors
//! concatenate into the sentence vector. A two-layer perceptron with a
//! tunable offset on the negative-class logit produces the distribution.

use std::collections::{BTreeMap, HashMap};
use std::fs;
use std::io;
use std::path::Path;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::label::Label;
use crate::tensor::{
    glorot_uniform, uniform_tensor, EngineRng, Graph, NodeId, ParamId, ParamStore, Tensor,
    TensorError,
};

pub const UNK_TOKEN: &str = "<unk>";
pub const DRUG1_TOKEN: &str = "drug1";
pub const DRUG2_TOKEN: &str = "drug2";
pub const DRUGOTHER_TOKEN: &str = "drugother";

pub const UNK_ID: usize = 0;

/// Init range for embedding tables without pre-trained vectors.
const EMBED_BOUND: f64 = 0.05;

#[derive(Debug, Error)]
pub enum TextError {
    #[error("instance {pair_id:?}: {reason}")]
    BadInstance { pair_id: String, reason: String },
    #[error("missing parameter {name:?} in checkpoint")]
    MissingParam { name: String },
    #[error("parameter {name:?} has shape {got:?}, expected {expected:?}")]
    ParamShape {
        name: String,
        expected: Vec<usize>,
        got: Vec<usize>,
    },
    #[error(transparent)]
    Tensor(#[from] TensorError),
}

// ── tokenization & vocabulary ──────────────────────────────────────────

/// Lowercase, split on whitespace and punctuation boundaries, keep
/// punctuation marks as their own tokens.
pub fn tokenize(text: &str) -> Vec<String> {
    let mut tokens = Vec::new();
    let mut current = String::new();
    for ch in text.chars().flat_map(char::to_lowercase) {
        if ch.is_alphanumeric() {
            current.push(ch);
        } else {
            if !current.is_empty() {
                tokens.push(std::mem::take(&mut current));
            }
            if !ch.is_whitespace() {
                tokens.push(ch.to_string());
            }
        }
    }
    if !current.is_empty() {
        tokens.push(current);
    }
    tokens
}

/// Token-to-id map with fixed special slots. Tokens seen only once in the
/// training corpus are dropped (they featurize to UNK); ids beyond the
/// specials follow sorted token order, so the vocabulary is independent of
/// document order.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct WordVocab {
    ids: BTreeMap<String, usize>,
}

const SPECIALS: [&str; 4] = [UNK_TOKEN, DRUG1_TOKEN, DRUG2_TOKEN, DRUGOTHER_TOKEN];

impl WordVocab {
    pub fn build<'a>(tokens: impl IntoIterator<Item = &'a str>) -> Self {
        let mut counts: BTreeMap<&str, usize> = BTreeMap::new();
        for tok in tokens {
            *counts.entry(tok).or_insert(0) += 1;
        }
        let mut ids = BTreeMap::new();
        for (i, special) in SPECIALS.iter().enumerate() {
            ids.insert((*special).to_string(), i);
        }
        let mut next = SPECIALS.len();
        for (tok, count) in counts {
            if count >= 2 && !ids.contains_key(tok) {
                ids.insert(tok.to_string(), next);
                next += 1;
            }
        }
        Self { ids }
    }

    pub fn id(&self, token: &str) -> usize {
        self.ids.get(token).copied().unwrap_or(UNK_ID)
    }

    pub fn size(&self) -> usize {
        self.ids.len()
    }

    /// Tokens ordered by id (the embedding-table row order).
    pub fn tokens_by_id(&self) -> Vec<&str> {
        let mut out = vec![""; self.ids.len()];
        for (tok, &id) in &self.ids {
            out[id] = tok;
        }
        out
    }

    pub fn save(&self, path: &Path) -> io::Result<()> {
        let mut text = String::new();
        for (id, tok) in self.tokens_by_id().iter().enumerate() {
            text.push_str(&format!("{tok}\t{id}\n"));
        }
        fs::write(path, text)
    }

    pub fn load(path: &Path) -> io::Result<Self> {
        let text = fs::read_to_string(path)?;
        let mut ids = BTreeMap::new();
        for line in text.lines() {
            let mut parts = line.split('\t');
            let (Some(tok), Some(id)) = (parts.next(), parts.next()) else {
                return Err(io::Error::new(
                    io::ErrorKind::InvalidData,
                    format!("bad vocabulary line {line:?}"),
                ));
            };
            let id = id.parse().map_err(|_| {
                io::Error::new(io::ErrorKind::InvalidData, format!("bad id in {line:?}"))
            })?;
            ids.insert(tok.to_string(), id);
        }
        Ok(Self { ids })
    }
}

// ── position features ──────────────────────────────────────────────────

/// Offsets clamp into ±clip and shift to nonnegative table indices, so the
/// two boundary rows absorb everything further away.
pub fn position_ids(len: usize, target: usize, clip: usize) -> Vec<usize> {
    let clip = clip as i64;
    (0..len as i64)
        .map(|k| ((k - target as i64).clamp(-clip, clip) + clip) as usize)
        .collect()
}

pub fn build_position_features(
    len: usize,
    drug1_index: usize,
    drug2_index: usize,
    clip: usize,
) -> (Vec<usize>, Vec<usize>) {
    (
        position_ids(len, drug1_index, clip),
        position_ids(len, drug2_index, clip),
    )
}

pub fn position_table_rows(clip: usize) -> usize {
    2 * clip + 1
}

// ── instances ──────────────────────────────────────────────────────────

/// A masked, featurized candidate pair ready for the model.
#[derive(Debug, Clone, PartialEq)]
pub struct TextInstance {
    pub pair_id: String,
    pub token_ids: Vec<usize>,
    pub pos1_ids: Vec<usize>,
    pub pos2_ids: Vec<usize>,
    pub label: Label,
    pub drug1_link: Option<String>,
    pub drug2_link: Option<String>,
}

impl TextInstance {
    pub fn len(&self) -> usize {
        self.token_ids.len()
    }

    pub fn is_empty(&self) -> bool {
        self.token_ids.is_empty()
    }

    pub fn validate(&self) -> Result<(), TextError> {
        if self.token_ids.is_empty()
            || self.token_ids.len() != self.pos1_ids.len()
            || self.token_ids.len() != self.pos2_ids.len()
        {
            return Err(TextError::BadInstance {
                pair_id: self.pair_id.clone(),
                reason: format!(
                    "feature lengths disagree: {} tokens, {} / {} positions",
                    self.token_ids.len(),
                    self.pos1_ids.len(),
                    self.pos2_ids.len()
                ),
            });
        }
        Ok(())
    }
}

// ── the model ──────────────────────────────────────────────────────────

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TextModelConfig {
    pub vocab_size: usize,
    pub word_dim: usize,
    pub position_dim: usize,
    pub position_clip: usize,
    pub windows: Vec<usize>,
    pub filters: usize,
    pub hidden: usize,
    pub classes: usize,
    /// False in the molecule-only ablation, which classifies pair vectors
    /// without reading any token.
    pub use_text: bool,
    /// Length of the molecule pair vector appended to the sentence vector
    /// (0 in text-only mode).
    pub molecule_dim: usize,
}

impl TextModelConfig {
    pub fn sentence_dim(&self) -> usize {
        if self.use_text {
            self.windows.len() * self.filters
        } else {
            0
        }
    }

    pub fn feature_dim(&self) -> usize {
        self.sentence_dim() + self.molecule_dim
    }
}

#[derive(Debug, Clone)]
struct ConvBank {
    window: usize,
    weight: ParamId,
    bias: ParamId,
}

#[derive(Debug, Clone)]
struct CnnParams {
    word_embed: ParamId,
    pos1_embed: ParamId,
    pos2_embed: ParamId,
    banks: Vec<ConvBank>,
}

#[derive(Debug, Clone)]
pub struct TextModel {
    cnn: Option<CnnParams>,
    w1: ParamId,
    b1: ParamId,
    w2: ParamId,
    b2: ParamId,
    negative_bias: ParamId,
    pub config: TextModelConfig,
}

fn fetch(store: &ParamStore, name: &str, expected: &[usize]) -> Result<ParamId, TextError> {
    let id = store.lookup(name).ok_or_else(|| TextError::MissingParam {
        name: name.to_string(),
    })?;
    let got = store.value(id).shape();
    if got != expected {
        return Err(TextError::ParamShape {
            name: name.to_string(),
            expected: expected.to_vec(),
            got: got.to_vec(),
        });
    }
    Ok(id)
}

impl TextModel {
    /// Register fresh parameters. `word_table` injects a pre-trained word
    /// embedding table; otherwise rows are uniform in ±0.05.
    pub fn init(
        store: &mut ParamStore,
        rng: &mut EngineRng,
        config: TextModelConfig,
        word_table: Option<Tensor>,
    ) -> Self {
        let row_dim = config.word_dim + 2 * config.position_dim;
        let cnn = config.use_text.then(|| {
            let word = word_table.unwrap_or_else(|| {
                uniform_tensor(rng, &[config.vocab_size, config.word_dim], EMBED_BOUND)
            });
            assert_eq!(
                word.shape(),
                &[config.vocab_size, config.word_dim],
                "word table shape disagrees with the configuration"
            );
            let pos_rows = position_table_rows(config.position_clip);
            CnnParams {
                word_embed: store.register_embedding("text.word_embed", word),
                pos1_embed: store.register_embedding(
                    "text.pos1_embed",
                    uniform_tensor(rng, &[pos_rows, config.position_dim], EMBED_BOUND),
                ),
                pos2_embed: store.register_embedding(
                    "text.pos2_embed",
                    uniform_tensor(rng, &[pos_rows, config.position_dim], EMBED_BOUND),
                ),
                banks: config
                    .windows
                    .iter()
                    .map(|&window| ConvBank {
                        window,
                        weight: store.register(
                            format!("text.conv{window}.weight"),
                            glorot_uniform(rng, window * row_dim, config.filters),
                        ),
                        bias: store.register(
                            format!("text.conv{window}.bias"),
                            Tensor::zeros(&[config.filters]),
                        ),
                    })
                    .collect(),
            }
        });
        let feature_dim = config.feature_dim();
        Self {
            cnn,
            w1: store.register(
                "text.cls.w1",
                glorot_uniform(rng, config.hidden, feature_dim),
            ),
            b1: store.register("text.cls.b1", Tensor::zeros(&[config.hidden])),
            w2: store.register("text.cls.w2", glorot_uniform(rng, config.classes, config.hidden)),
            b2: store.register("text.cls.b2", Tensor::zeros(&[config.classes])),
            negative_bias: store.register_embedding("text.negative_bias", Tensor::scalar(0.0)),
            config,
        }
    }

    /// Rebind to checkpoint parameters, validating every shape.
    pub fn attach(store: &ParamStore, config: TextModelConfig) -> Result<Self, TextError> {
        let row_dim = config.word_dim + 2 * config.position_dim;
        let cnn = if config.use_text {
            let pos_rows = position_table_rows(config.position_clip);
            Some(CnnParams {
                word_embed: fetch(store, "text.word_embed", &[config.vocab_size, config.word_dim])?,
                pos1_embed: fetch(store, "text.pos1_embed", &[pos_rows, config.position_dim])?,
                pos2_embed: fetch(store, "text.pos2_embed", &[pos_rows, config.position_dim])?,
                banks: config
                    .windows
                    .iter()
                    .map(|&window| {
                        Ok(ConvBank {
                            window,
                            weight: fetch(
                                store,
                                &format!("text.conv{window}.weight"),
                                &[window * row_dim, config.filters],
                            )?,
                            bias: fetch(
                                store,
                                &format!("text.conv{window}.bias"),
                                &[config.filters],
                            )?,
                        })
                    })
                    .collect::<Result<_, TextError>>()?,
            })
        } else {
            None
        };
        Ok(Self {
            w1: fetch(store, "text.cls.w1", &[config.hidden, config.feature_dim()])?,
            b1: fetch(store, "text.cls.b1", &[config.hidden])?,
            w2: fetch(store, "text.cls.w2", &[config.classes, config.hidden])?,
            b2: fetch(store, "text.cls.b2", &[config.classes])?,
            negative_bias: fetch(store, "text.negative_bias", &[1])?,
            cnn,
            config,
        })
    }

    /// Every parameter the optimizer should update. The negative-class
    /// offset is tuned by sweep, not by gradient, so it is excluded.
    pub fn trainable_ids(&self) -> Vec<ParamId> {
        let mut ids = vec![self.w1, self.b1, self.w2, self.b2];
        if let Some(cnn) = &self.cnn {
            ids.extend([cnn.word_embed, cnn.pos1_embed, cnn.pos2_embed]);
            for bank in &cnn.banks {
                ids.extend([bank.weight, bank.bias]);
            }
        }
        ids
    }

    pub fn negative_bias(&self, store: &ParamStore) -> f64 {
        store.value(self.negative_bias).item()
    }

    pub fn set_negative_bias(&self, store: &mut ParamStore, value: f64) {
        store.value_mut(self.negative_bias).data_mut()[0] = value;
    }

    /// Sentence vector: convolution over zero-padded token rows for each
    /// window size, max pooling over positions, windows concatenated.
    pub fn cnn_encode(
        &self,
        g: &mut Graph,
        store: &ParamStore,
        instance: &TextInstance,
    ) -> Result<NodeId, TextError> {
        instance.validate()?;
        let cnn = self.cnn.as_ref().ok_or_else(|| TextError::BadInstance {
            pair_id: instance.pair_id.clone(),
            reason: "model has no text encoder".to_string(),
        })?;
        let word = g.param(store, cnn.word_embed);
        let pos1 = g.param(store, cnn.pos1_embed);
        let pos2 = g.param(store, cnn.pos2_embed);
        let word_rows = g.lookup(word, &instance.token_ids)?;
        let pos1_rows = g.lookup(pos1, &instance.pos1_ids)?;
        let pos2_rows = g.lookup(pos2, &instance.pos2_ids)?;
        let embedded = g.concat(1, &[word_rows, pos1_rows, pos2_rows])?;
        let row_dim = self.config.word_dim + 2 * self.config.position_dim;

        let mut pooled = Vec::with_capacity(cnn.banks.len());
        for bank in &cnn.banks {
            let pad = (bank.window - 1) / 2;
            let padded = if pad > 0 {
                let top = g.constant(Tensor::zeros(&[pad, row_dim]));
                let bottom = g.constant(Tensor::zeros(&[pad, row_dim]));
                g.concat(0, &[top, embedded, bottom])?
            } else {
                embedded
            };
            let windows = g.unfold(padded, bank.window)?;
            let weight = g.param(store, bank.weight);
            let bias = g.param(store, bank.bias);
            let scores = g.matmul(windows, weight)?;
            let scores = g.add_row(scores, bias)?;
            let active = g.relu(scores);
            pooled.push(g.max_axis(active, 0)?);
        }
        Ok(g.concat(0, &pooled)?)
    }

    /// Five-way distribution from a feature vector, including the
    /// negative-class logit offset.
    pub fn classify(
        &self,
        g: &mut Graph,
        store: &ParamStore,
        features: NodeId,
    ) -> Result<NodeId, TensorError> {
        let w1 = g.param(store, self.w1);
        let b1 = g.param(store, self.b1);
        let w2 = g.param(store, self.w2);
        let b2 = g.param(store, self.b2);
        let lin1 = g.matmul(w1, features)?;
        let lin1 = g.add(lin1, b1)?;
        let hidden = g.relu(lin1);
        let lin2 = g.matmul(w2, hidden)?;
        let logits = g.add(lin2, b2)?;
        // The negative class is the last label; its logit carries the tuned
        // offset. The offset is a stored parameter (so checkpoints keep it)
        // but it is never handed to the optimizer.
        debug_assert_eq!(self.config.classes, Label::ALL.len());
        let bias = g.param(store, self.negative_bias);
        let zeros = g.constant(Tensor::zeros(&[self.config.classes - 1]));
        let offset = g.concat(0, &[zeros, bias])?;
        let logits = g.add(logits, offset)?;
        g.softmax(logits)
    }

    /// Full forward pass. `molecule_vector`, when present, is the
    /// already-normalized pair vector appended after the sentence vector
    /// (or used alone in the molecule-only ablation).
    pub fn forward(
        &self,
        g: &mut Graph,
        store: &ParamStore,
        instance: &TextInstance,
        molecule_vector: Option<&[f64]>,
    ) -> Result<NodeId, TextError> {
        let mut features = Vec::with_capacity(2);
        if self.config.use_text {
            features.push(self.cnn_encode(g, store, instance)?);
        }
        if self.config.molecule_dim > 0 {
            let v = molecule_vector.ok_or_else(|| TextError::BadInstance {
                pair_id: instance.pair_id.clone(),
                reason: "mode requires a molecule vector".to_string(),
            })?;
            features.push(g.constant(Tensor::vector(v.to_vec())));
        }
        let joined = match features.as_slice() {
            [single] => *single,
            several => g.concat(0, several)?,
        };
        Ok(self.classify(g, store, joined)?)
    }
}

// ── pre-trained embeddings ─────────────────────────────────────────────

#[derive(Debug, Error)]
pub enum EmbeddingError {
    #[error("embedding io: {0}")]
    Io(#[from] std::io::Error),
    #[error("embedding file line {line}: {reason}")]
    Parse { line: usize, reason: String },
    #[error("embedding file is empty")]
    Empty,
}

/// Text-format word vectors: one `word v1 .. vD` per line.
#[derive(Debug, Clone)]
pub struct PretrainedEmbeddings {
    pub dim: usize,
    vectors: HashMap<String, Vec<f64>>,
    mean: Vec<f64>,
}

impl PretrainedEmbeddings {
    pub fn load(path: &Path) -> Result<Self, EmbeddingError> {
        let text = fs::read_to_string(path)?;
        let mut vectors = HashMap::new();
        let mut dim = None;
        for (i, line) in text.lines().enumerate() {
            if line.trim().is_empty() {
                continue;
            }
            let mut parts = line.split_whitespace();
            let word = parts.next().expect("non-empty line has a first token");
            let values: Vec<f64> = parts
                .map(str::parse)
                .collect::<Result<_, std::num::ParseFloatError>>()
                .map_err(|e| EmbeddingError::Parse {
                    line: i + 1,
                    reason: e.to_string(),
                })?;
            if values.is_empty() {
                return Err(EmbeddingError::Parse {
                    line: i + 1,
                    reason: "no vector components".to_string(),
                });
            }
            match dim {
                None => dim = Some(values.len()),
                Some(d) if d != values.len() => {
                    return Err(EmbeddingError::Parse {
                        line: i + 1,
                        reason: format!("expected {d} components, found {}", values.len()),
                    })
                }
                _ => {}
            }
            vectors.insert(word.to_string(), values);
        }
        let dim = dim.ok_or(EmbeddingError::Empty)?;
        let mut mean = vec![0.0; dim];
        for v in vectors.values() {
            for (m, x) in mean.iter_mut().zip(v) {
                *m += x;
            }
        }
        for m in &mut mean {
            *m /= vectors.len() as f64;
        }
        Ok(Self { dim, vectors, mean })
    }

    pub fn get(&self, word: &str) -> Option<&[f64]> {
        self.vectors.get(word).map(Vec::as_slice)
    }

    /// Build the word table for a vocabulary: known words take their
    /// vector, the drug placeholders take the vector of "drug", and
    /// everything else (including UNK) takes the mean of all vectors.
    pub fn word_table(&self, vocab: &WordVocab) -> Tensor {
        let drug = self
            .vectors
            .get("drug")
            .cloned()
            .unwrap_or_else(|| self.mean.clone());
        let mut data = Vec::with_capacity(vocab.size() * self.dim);
        for token in vocab.tokens_by_id() {
            let row = match token {
                DRUG1_TOKEN | DRUG2_TOKEN => &drug,
                other => self.vectors.get(other).unwrap_or(&self.mean),
            };
            data.extend_from_slice(row);
        }
        Tensor::new(vec![vocab.size(), self.dim], data).expect("rows are dim-length")
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn tokenizer_splits_punctuation_and_lowercases() {
        assert_eq!(
            tokenize("Aspirin (50 mg) increases X-effects."),
            ["aspirin", "(", "50", "mg", ")", "increases", "x", "-", "effects", "."]
        );
    }

    #[test]
    fn vocabulary_drops_singletons_and_orders_stably() {
        let docs_a = ["the", "dose", "the", "dose", "rare"];
        let docs_b = ["rare", "dose", "the", "dose", "the"];
        let a = WordVocab::build(docs_a.iter().flat_map(|s| std::iter::repeat(*s).take(1)));
        let b = WordVocab::build(docs_b.iter().flat_map(|s| std::iter::repeat(*s).take(1)));
        assert_eq!(a, b, "vocabulary must not depend on token order");
        assert_eq!(a.id("rare"), UNK_ID, "singleton maps to UNK");
        assert_ne!(a.id("dose"), UNK_ID);
        assert_eq!(a.id(DRUG1_TOKEN), 1);
    }

    #[test]
    fn position_offsets_clamp() {
        let ids = position_ids(4, 1, 50);
        assert_eq!(ids, [49, 50, 51, 52]);
        // token 80 positions before the target clamps to -50
        let far = position_ids(81, 80, 50);
        assert_eq!(far[0], 0);
        // token at the target is offset 0 -> index clip
        assert_eq!(far[80], 50);
        // 3 positions after
        let (p1, _) = build_position_features(10, 2, 5, 50);
        assert_eq!(p1[5], 53);
    }

    #[test]
    fn word_table_applies_substitution_rules() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("vectors.txt");
        std::fs::write(&path, "drug 1.0 2.0\naspirin 3.0 4.0\nthe 5.0 6.0\n").unwrap();
        let emb = PretrainedEmbeddings::load(&path).unwrap();
        assert_eq!(emb.dim, 2);

        let vocab = WordVocab::build(
            ["aspirin", "aspirin", "warfarin", "warfarin", "the", "the"].into_iter(),
        );
        let table = emb.word_table(&vocab);
        let row = |tok: &str| {
            let id = vocab.id(tok);
            table.data()[id * 2..(id + 1) * 2].to_vec()
        };
        let mean = vec![3.0, 4.0]; // mean of the three file vectors
        assert_eq!(row("aspirin"), vec![3.0, 4.0]);
        assert_eq!(row(DRUG1_TOKEN), vec![1.0, 2.0], "drug1 takes the vector of 'drug'");
        assert_eq!(row(DRUG2_TOKEN), vec![1.0, 2.0]);
        assert_eq!(row("warfarin"), mean, "in-vocab but unseen word takes the mean");
        assert_eq!(row(UNK_TOKEN), mean);
    }
}
