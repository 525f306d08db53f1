//! Graph encoders over molecules and the molecular pair classifier.
//!
//! Two encoder families produce a fixed-size vector per molecule:
//!
//! * the fingerprint encoder sums each atom's state with its neighbors,
//!   applies a degree-specific weight and sigmoid per step, and reads out
//!   the sum of per-step softmax projections;
//! * the gated encoder sends neighbor states through bond-type weights into
//!   a shared GRU and reads out with a sigmoid gate over (final, initial)
//!   states times a linear view of the final state.
//!
//! Pair vectors are the concatenation of the two molecule vectors in
//! mention order; a two-layer perceptron with softmax scores the pair.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::smiles::{BondType, MolGraph, UnknownAtomError};
use crate::tensor::{
    glorot_uniform, uniform_tensor, EngineRng, Graph, NodeId, ParamId, ParamStore, Tensor,
    TensorError,
};

/// Degree buckets 1..=6; isolated atoms use bucket 1, higher degrees clamp.
pub const DEGREE_BUCKETS: usize = 6;

/// Init range for atom embeddings.
const EMBED_BOUND: f64 = 0.05;

#[derive(Debug, Error)]
pub enum ModelError {
    #[error("cannot encode an empty molecular graph")]
    EmptyGraph,
    #[error("atom id list length {ids} does not match atom count {atoms}")]
    AtomIdMismatch { ids: usize, atoms: usize },
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
    #[error(transparent)]
    UnknownAtom(#[from] UnknownAtomError),
}

/// Which graph encoder a configuration selects.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum GraphEncoderKind {
    Nfp,
    Ggnn,
}

impl GraphEncoderKind {
    pub fn as_str(self) -> &'static str {
        match self {
            GraphEncoderKind::Nfp => "nfp",
            GraphEncoderKind::Ggnn => "ggnn",
        }
    }
}

fn degree_bucket(degree: usize) -> usize {
    degree.clamp(1, DEGREE_BUCKETS) - 1
}

fn fetch(
    store: &ParamStore,
    name: &str,
    expected: &[usize],
) -> Result<ParamId, ModelError> {
    let id = store.lookup(name).ok_or_else(|| ModelError::MissingParam {
        name: name.to_string(),
    })?;
    let got = store.value(id).shape();
    if got != expected {
        return Err(ModelError::ParamShape {
            name: name.to_string(),
            expected: expected.to_vec(),
            got: got.to_vec(),
        });
    }
    Ok(id)
}

// ── fingerprint encoder ────────────────────────────────────────────────

#[derive(Debug, Clone)]
pub struct NfpModel {
    pub embed: ParamId,
    /// One weight per (propagation step, degree bucket).
    step_weights: Vec<[ParamId; DEGREE_BUCKETS]>,
    /// One readout projection per state t = 0..=steps.
    readout: Vec<ParamId>,
    pub dim: usize,
    pub steps: usize,
}

impl NfpModel {
    pub fn init(
        store: &mut ParamStore,
        rng: &mut EngineRng,
        vocab_size: usize,
        dim: usize,
        steps: usize,
    ) -> Self {
        let embed = store.register_embedding(
            "nfp.atom_embed",
            uniform_tensor(rng, &[vocab_size, dim], EMBED_BOUND),
        );
        let step_weights = (0..steps)
            .map(|t| {
                std::array::from_fn(|b| {
                    store.register(
                        format!("nfp.step{t}.deg{}", b + 1),
                        glorot_uniform(rng, dim, dim),
                    )
                })
            })
            .collect();
        let readout = (0..=steps)
            .map(|t| store.register(format!("nfp.readout{t}"), glorot_uniform(rng, dim, dim)))
            .collect();
        Self {
            embed,
            step_weights,
            readout,
            dim,
            steps,
        }
    }

    /// Rebind to parameters already present in `store` (e.g. a checkpoint).
    pub fn attach(
        store: &ParamStore,
        vocab_size: usize,
        dim: usize,
        steps: usize,
    ) -> Result<Self, ModelError> {
        let embed = fetch(store, "nfp.atom_embed", &[vocab_size, dim])?;
        let mut step_weights = Vec::with_capacity(steps);
        for t in 0..steps {
            let mut row = [embed; DEGREE_BUCKETS];
            for (b, slot) in row.iter_mut().enumerate() {
                *slot = fetch(store, &format!("nfp.step{t}.deg{}", b + 1), &[dim, dim])?;
            }
            step_weights.push(row);
        }
        let readout = (0..=steps)
            .map(|t| fetch(store, &format!("nfp.readout{t}"), &[dim, dim]))
            .collect::<Result<_, _>>()?;
        Ok(Self {
            embed,
            step_weights,
            readout,
            dim,
            steps,
        })
    }

    /// Molecule vector: states start at the atom embeddings, each step sums
    /// self plus neighbors and squashes through the degree weight, and every
    /// intermediate state contributes a softmax projection to the readout.
    pub fn encode(
        &self,
        g: &mut Graph,
        store: &ParamStore,
        mol: &MolGraph,
        atom_ids: &[usize],
    ) -> Result<NodeId, ModelError> {
        if mol.atoms.is_empty() {
            return Err(ModelError::EmptyGraph);
        }
        if atom_ids.len() != mol.atoms.len() {
            return Err(ModelError::AtomIdMismatch {
                ids: atom_ids.len(),
                atoms: mol.atoms.len(),
            });
        }
        let adjacency = mol.adjacency();
        let embed = g.param(store, self.embed);
        let mut states = Vec::with_capacity(atom_ids.len());
        for &id in atom_ids {
            let row = g.lookup(embed, &[id])?;
            states.push(g.reshape(row, vec![self.dim])?);
        }

        let mut readout = g.constant(Tensor::zeros(&[self.dim]));
        for t in 0..=self.steps {
            let proj = g.param(store, self.readout[t]);
            for &state in &states {
                let scores = g.matmul(proj, state)?;
                let soft = g.softmax(scores)?;
                readout = g.add(readout, soft)?;
            }
            if t == self.steps {
                break;
            }
            let mut next = Vec::with_capacity(states.len());
            for (v, neighbors) in adjacency.iter().enumerate() {
                let mut message = states[v];
                for &(w, _) in neighbors {
                    message = g.add(message, states[w])?;
                }
                let weight = g.param(store, self.step_weights[t][degree_bucket(neighbors.len())]);
                let lin = g.matmul(weight, message)?;
                next.push(g.sigmoid(lin));
            }
            states = next;
        }
        Ok(readout)
    }
}

// ── gated encoder ──────────────────────────────────────────────────────

#[derive(Debug, Clone, Copy)]
struct GruParams {
    reset_input: ParamId,
    reset_hidden: ParamId,
    reset_bias: ParamId,
    update_input: ParamId,
    update_hidden: ParamId,
    update_bias: ParamId,
    cand_input: ParamId,
    cand_hidden: ParamId,
    cand_bias: ParamId,
}

#[derive(Debug, Clone)]
pub struct GgnnModel {
    pub embed: ParamId,
    /// One message weight per bond type.
    bond_weights: [ParamId; 4],
    gru: GruParams,
    gate_weight: ParamId,
    gate_bias: ParamId,
    view_weight: ParamId,
    view_bias: ParamId,
    pub dim: usize,
    pub steps: usize,
}

fn bond_param_name(kind: BondType) -> String {
    let tag = match kind {
        BondType::Single => "single",
        BondType::Double => "double",
        BondType::Triple => "triple",
        BondType::Aromatic => "aromatic",
    };
    format!("ggnn.bond.{tag}")
}

impl GgnnModel {
    pub fn init(
        store: &mut ParamStore,
        rng: &mut EngineRng,
        vocab_size: usize,
        dim: usize,
        steps: usize,
    ) -> Self {
        let embed = store.register_embedding(
            "ggnn.atom_embed",
            uniform_tensor(rng, &[vocab_size, dim], EMBED_BOUND),
        );
        let bond_weights = std::array::from_fn(|i| {
            store.register(bond_param_name(BondType::ALL[i]), glorot_uniform(rng, dim, dim))
        });
        let mut gate = |name: &str, rows: usize, cols: usize| {
            store.register(format!("ggnn.gru.{name}"), glorot_uniform(rng, rows, cols))
        };
        let gru = GruParams {
            reset_input: gate("reset_input", dim, dim),
            reset_hidden: gate("reset_hidden", dim, dim),
            update_input: gate("update_input", dim, dim),
            update_hidden: gate("update_hidden", dim, dim),
            cand_input: gate("cand_input", dim, dim),
            cand_hidden: gate("cand_hidden", dim, dim),
            reset_bias: store.register("ggnn.gru.reset_bias", Tensor::zeros(&[dim])),
            update_bias: store.register("ggnn.gru.update_bias", Tensor::zeros(&[dim])),
            cand_bias: store.register("ggnn.gru.cand_bias", Tensor::zeros(&[dim])),
        };
        let gate_weight = store.register("ggnn.readout.gate_weight", glorot_uniform(rng, dim, 2 * dim));
        let gate_bias = store.register("ggnn.readout.gate_bias", Tensor::zeros(&[dim]));
        let view_weight = store.register("ggnn.readout.view_weight", glorot_uniform(rng, dim, dim));
        let view_bias = store.register("ggnn.readout.view_bias", Tensor::zeros(&[dim]));
        Self {
            embed,
            bond_weights,
            gru,
            gate_weight,
            gate_bias,
            view_weight,
            view_bias,
            dim,
            steps,
        }
    }

    pub fn attach(
        store: &ParamStore,
        vocab_size: usize,
        dim: usize,
        steps: usize,
    ) -> Result<Self, ModelError> {
        let embed = fetch(store, "ggnn.atom_embed", &[vocab_size, dim])?;
        let mut bond_weights = [embed; 4];
        for (i, slot) in bond_weights.iter_mut().enumerate() {
            *slot = fetch(store, &bond_param_name(BondType::ALL[i]), &[dim, dim])?;
        }
        let gru = GruParams {
            reset_input: fetch(store, "ggnn.gru.reset_input", &[dim, dim])?,
            reset_hidden: fetch(store, "ggnn.gru.reset_hidden", &[dim, dim])?,
            reset_bias: fetch(store, "ggnn.gru.reset_bias", &[dim])?,
            update_input: fetch(store, "ggnn.gru.update_input", &[dim, dim])?,
            update_hidden: fetch(store, "ggnn.gru.update_hidden", &[dim, dim])?,
            update_bias: fetch(store, "ggnn.gru.update_bias", &[dim])?,
            cand_input: fetch(store, "ggnn.gru.cand_input", &[dim, dim])?,
            cand_hidden: fetch(store, "ggnn.gru.cand_hidden", &[dim, dim])?,
            cand_bias: fetch(store, "ggnn.gru.cand_bias", &[dim])?,
        };
        Ok(Self {
            embed,
            bond_weights,
            gru,
            gate_weight: fetch(store, "ggnn.readout.gate_weight", &[dim, 2 * dim])?,
            gate_bias: fetch(store, "ggnn.readout.gate_bias", &[dim])?,
            view_weight: fetch(store, "ggnn.readout.view_weight", &[dim, dim])?,
            view_bias: fetch(store, "ggnn.readout.view_bias", &[dim])?,
            dim,
            steps,
        })
    }

    fn gru_cell(
        &self,
        g: &mut Graph,
        store: &ParamStore,
        hidden: NodeId,
        input: NodeId,
    ) -> Result<NodeId, TensorError> {
        let p = &self.gru;
        let affine = |g: &mut Graph, w: ParamId, u: ParamId, b: ParamId, h: NodeId, x: NodeId| {
            let wp = g.param(store, w);
            let up = g.param(store, u);
            let bp = g.param(store, b);
            let wx = g.matmul(wp, x)?;
            let uh = g.matmul(up, h)?;
            let sum = g.add(wx, uh)?;
            g.add(sum, bp)
        };
        let reset_lin = affine(g, p.reset_input, p.reset_hidden, p.reset_bias, hidden, input)?;
        let reset = g.sigmoid(reset_lin);
        let update_lin = affine(g, p.update_input, p.update_hidden, p.update_bias, hidden, input)?;
        let update = g.sigmoid(update_lin);
        let gated_hidden = g.mul(reset, hidden)?;
        let cand_lin = affine(g, p.cand_input, p.cand_hidden, p.cand_bias, gated_hidden, input)?;
        let cand = g.tanh(cand_lin);
        let ones = g.constant(Tensor::new(vec![self.dim], vec![1.0; self.dim]).expect("fixed shape"));
        let keep = g.sub(ones, update)?;
        let kept = g.mul(keep, hidden)?;
        let fresh = g.mul(update, cand)?;
        g.add(kept, fresh)
    }

    /// Molecule vector: neighbor states flow through bond-type weights into
    /// a shared GRU; the readout gates each atom's final state against its
    /// initial one and sums over atoms.
    pub fn encode(
        &self,
        g: &mut Graph,
        store: &ParamStore,
        mol: &MolGraph,
        atom_ids: &[usize],
    ) -> Result<NodeId, ModelError> {
        if mol.atoms.is_empty() {
            return Err(ModelError::EmptyGraph);
        }
        if atom_ids.len() != mol.atoms.len() {
            return Err(ModelError::AtomIdMismatch {
                ids: atom_ids.len(),
                atoms: mol.atoms.len(),
            });
        }
        let adjacency = mol.adjacency();
        let embed = g.param(store, self.embed);
        let mut initial = Vec::with_capacity(atom_ids.len());
        for &id in atom_ids {
            let row = g.lookup(embed, &[id])?;
            initial.push(g.reshape(row, vec![self.dim])?);
        }
        let mut states = initial.clone();

        for _ in 0..self.steps {
            let mut messages = Vec::with_capacity(states.len());
            for neighbors in &adjacency {
                let mut message = g.constant(Tensor::zeros(&[self.dim]));
                for &(w, bond) in neighbors {
                    let weight = g.param(store, self.bond_weights[bond.index()]);
                    let contrib = g.matmul(weight, states[w])?;
                    message = g.add(message, contrib)?;
                }
                messages.push(message);
            }
            let mut next = Vec::with_capacity(states.len());
            for (v, &message) in messages.iter().enumerate() {
                next.push(self.gru_cell(g, store, states[v], message)?);
            }
            states = next;
        }

        let gate_w = g.param(store, self.gate_weight);
        let gate_b = g.param(store, self.gate_bias);
        let view_w = g.param(store, self.view_weight);
        let view_b = g.param(store, self.view_bias);
        let mut readout = g.constant(Tensor::zeros(&[self.dim]));
        for (v, &state) in states.iter().enumerate() {
            let both = g.concat(0, &[state, initial[v]])?;
            let gate_lin = g.matmul(gate_w, both)?;
            let gate_lin = g.add(gate_lin, gate_b)?;
            let gate = g.sigmoid(gate_lin);
            let view_lin = g.matmul(view_w, state)?;
            let view = g.add(view_lin, view_b)?;
            let term = g.mul(gate, view)?;
            readout = g.add(readout, term)?;
        }
        Ok(readout)
    }
}

// ── shared surface ─────────────────────────────────────────────────────

/// Encoder dispatch used by training and the CLI.
#[derive(Debug, Clone)]
pub enum MolEncoder {
    Nfp(NfpModel),
    Ggnn(GgnnModel),
}

impl MolEncoder {
    pub fn init(
        kind: GraphEncoderKind,
        store: &mut ParamStore,
        rng: &mut EngineRng,
        vocab_size: usize,
        dim: usize,
        steps: usize,
    ) -> Self {
        match kind {
            GraphEncoderKind::Nfp => {
                MolEncoder::Nfp(NfpModel::init(store, rng, vocab_size, dim, steps))
            }
            GraphEncoderKind::Ggnn => {
                MolEncoder::Ggnn(GgnnModel::init(store, rng, vocab_size, dim, steps))
            }
        }
    }

    pub fn attach(
        kind: GraphEncoderKind,
        store: &ParamStore,
        vocab_size: usize,
        dim: usize,
        steps: usize,
    ) -> Result<Self, ModelError> {
        match kind {
            GraphEncoderKind::Nfp => {
                NfpModel::attach(store, vocab_size, dim, steps).map(MolEncoder::Nfp)
            }
            GraphEncoderKind::Ggnn => {
                GgnnModel::attach(store, vocab_size, dim, steps).map(MolEncoder::Ggnn)
            }
        }
    }

    pub fn kind(&self) -> GraphEncoderKind {
        match self {
            MolEncoder::Nfp(_) => GraphEncoderKind::Nfp,
            MolEncoder::Ggnn(_) => GraphEncoderKind::Ggnn,
        }
    }

    pub fn dim(&self) -> usize {
        match self {
            MolEncoder::Nfp(m) => m.dim,
            MolEncoder::Ggnn(m) => m.dim,
        }
    }

    pub fn encode(
        &self,
        g: &mut Graph,
        store: &ParamStore,
        mol: &MolGraph,
        atom_ids: &[usize],
    ) -> Result<NodeId, ModelError> {
        match self {
            MolEncoder::Nfp(m) => m.encode(g, store, mol, atom_ids),
            MolEncoder::Ggnn(m) => m.encode(g, store, mol, atom_ids),
        }
    }
}

/// One side of a pair: a parsed molecule with its atom ids, or nothing when
/// the drug is unmatched (which contributes a zero vector).
pub type PairSide<'a> = Option<(&'a MolGraph, &'a [usize])>;

/// Pair vector `[left; right]` in mention order. An unmatched side is a
/// zero half, so two unmatched drugs give the zero vector.
pub fn encode_pair(
    g: &mut Graph,
    store: &ParamStore,
    encoder: &MolEncoder,
    left: PairSide,
    right: PairSide,
) -> Result<NodeId, ModelError> {
    let dim = encoder.dim();
    let mut halves = Vec::with_capacity(2);
    for side in [left, right] {
        let node = match side {
            Some((mol, ids)) => encoder.encode(g, store, mol, ids)?,
            None => g.constant(Tensor::zeros(&[dim])),
        };
        halves.push(node);
    }
    Ok(g.concat(0, &halves)?)
}

/// Run the encoder outside any training graph and return the plain vector.
pub fn molecule_vector(
    store: &ParamStore,
    encoder: &MolEncoder,
    mol: &MolGraph,
    atom_ids: &[usize],
) -> Result<Vec<f64>, ModelError> {
    let mut g = Graph::new();
    let node = encoder.encode(&mut g, store, mol, atom_ids)?;
    Ok(g.value(node).data().to_vec())
}

/// L2-normalize in place; the zero vector passes through unchanged.
pub fn l2_normalize(v: &mut [f64]) {
    let norm = v.iter().map(|x| x * x).sum::<f64>().sqrt();
    if norm > 0.0 {
        for x in v {
            *x /= norm;
        }
    }
}

// ── pair classifier ────────────────────────────────────────────────────

#[derive(Debug, Clone)]
pub struct MolPairClassifier {
    pub w1: ParamId,
    pub b1: ParamId,
    pub w2: ParamId,
    pub b2: ParamId,
    pub hidden: usize,
    pub input: usize,
}

impl MolPairClassifier {
    pub fn init(store: &mut ParamStore, rng: &mut EngineRng, pair_dim: usize, hidden: usize) -> Self {
        Self {
            w1: store.register("mol_cls.w1", glorot_uniform(rng, hidden, pair_dim)),
            b1: store.register("mol_cls.b1", Tensor::zeros(&[hidden])),
            w2: store.register("mol_cls.w2", glorot_uniform(rng, 2, hidden)),
            b2: store.register("mol_cls.b2", Tensor::zeros(&[2])),
            hidden,
            input: pair_dim,
        }
    }

    pub fn attach(store: &ParamStore, pair_dim: usize, hidden: usize) -> Result<Self, ModelError> {
        Ok(Self {
            w1: fetch(store, "mol_cls.w1", &[hidden, pair_dim])?,
            b1: fetch(store, "mol_cls.b1", &[hidden])?,
            w2: fetch(store, "mol_cls.w2", &[2, hidden])?,
            b2: fetch(store, "mol_cls.b2", &[2])?,
            hidden,
            input: pair_dim,
        })
    }

    /// Two-way distribution over (non-interacting, interacting).
    pub fn classify(
        &self,
        g: &mut Graph,
        store: &ParamStore,
        pair_vector: NodeId,
    ) -> Result<NodeId, TensorError> {
        let w1 = g.param(store, self.w1);
        let b1 = g.param(store, self.b1);
        let w2 = g.param(store, self.w2);
        let b2 = g.param(store, self.b2);
        let lin1 = g.matmul(w1, pair_vector)?;
        let lin1 = g.add(lin1, b1)?;
        let hidden = g.relu(lin1);
        let lin2 = g.matmul(w2, hidden)?;
        let logits = g.add(lin2, b2)?;
        g.softmax(logits)
    }
}
