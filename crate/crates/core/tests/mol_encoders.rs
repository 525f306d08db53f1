//! Behavioral checks for the two graph encoders and the pair classifier:
//! zero-weight algebra, permutation invariance, structure sensitivity and
//! finite-difference gradient verification.

use molfuse::mol::{
    encode_pair, l2_normalize, GgnnModel, GraphEncoderKind, MolEncoder, MolPairClassifier,
    NfpModel,
};
use molfuse::smiles::{atom_vocabulary, parse_smiles, AtomVocab, MolGraph};
use molfuse::tensor::{gradient_check_params, EngineRng, Graph, ParamStore, Tensor};

fn zero_all(store: &mut ParamStore) {
    let ids: Vec<_> = store.ids().collect();
    for id in ids {
        store.value_mut(id).data_mut().fill(0.0);
    }
}

fn encode_with(
    store: &ParamStore,
    encoder: &MolEncoder,
    vocab: &AtomVocab,
    smiles: &str,
) -> Vec<f64> {
    let mol = parse_smiles(smiles).unwrap();
    let ids = vocab.ids_for(&mol, false).unwrap();
    molfuse::mol::molecule_vector(store, encoder, &mol, &ids).unwrap()
}

fn max_abs_diff(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max)
}

fn shared_vocab() -> AtomVocab {
    let mols: Vec<MolGraph> = ["C", "O", "N", "S", "c1ccccc1"]
        .iter()
        .map(|s| parse_smiles(s).unwrap())
        .collect();
    atom_vocabulary(mols.iter())
}

// ── fingerprint encoder ────────────────────────────────────────────────

#[test]
fn nfp_zero_weights_single_node_sums_uniform_softmaxes() {
    let mut rng = EngineRng::from_seed(1);
    let mut store = ParamStore::new();
    let model = NfpModel::init(&mut store, &mut rng, 3, 2, 1);
    zero_all(&mut store);

    let mol = parse_smiles("C").unwrap();
    let out = molfuse::mol::molecule_vector(&store, &MolEncoder::Nfp(model), &mol, &[1]).unwrap();
    // Readout over t = 0 and t = 1, each softmax(0) = [0.5, 0.5].
    assert_eq!(out, vec![1.0, 1.0]);
}

#[test]
fn nfp_is_permutation_invariant() {
    let mut rng = EngineRng::from_seed(5);
    let mut store = ParamStore::new();
    let vocab = shared_vocab();
    let model = MolEncoder::Nfp(NfpModel::init(&mut store, &mut rng, vocab.size(), 8, 3));

    let mol = parse_smiles("c1ccccc1").unwrap();
    let ids = vocab.ids_for(&mol, false).unwrap();
    let base = molfuse::mol::molecule_vector(&store, &model, &mol, &ids).unwrap();

    let perm = vec![3, 5, 0, 2, 4, 1];
    let relabeled = mol.relabel(&perm);
    let mut relabeled_ids = vec![0; ids.len()];
    for (old, &new) in perm.iter().enumerate() {
        relabeled_ids[new] = ids[old];
    }
    let permuted = molfuse::mol::molecule_vector(&store, &model, &relabeled, &relabeled_ids).unwrap();
    assert!(max_abs_diff(&base, &permuted) < 1e-9);
}

#[test]
fn nfp_distinguishes_different_molecules() {
    let mut rng = EngineRng::from_seed(9);
    let mut store = ParamStore::new();
    let vocab = shared_vocab();
    let model = MolEncoder::Nfp(NfpModel::init(&mut store, &mut rng, vocab.size(), 6, 2));
    let a = encode_with(&store, &model, &vocab, "CO");
    let b = encode_with(&store, &model, &vocab, "CCO");
    assert!(max_abs_diff(&a, &b) > 1e-6, "CO and CCO should encode differently");
}

/// With zero propagation steps the readout reduces to
/// sum over atoms of softmax(W0 * embedding).
#[test]
fn nfp_zero_steps_degenerates_to_projected_embeddings() {
    let mut rng = EngineRng::from_seed(3);
    let mut store = ParamStore::new();
    let model = NfpModel::init(&mut store, &mut rng, 3, 2, 0);

    let embed = store.lookup("nfp.atom_embed").unwrap();
    store.value_mut(embed).data_mut().copy_from_slice(&[
        0.0, 0.0, // unk
        0.3, -0.1, // atom 1
        -0.4, 0.2, // atom 2
    ]);
    let w0 = store.lookup("nfp.readout0").unwrap();
    store.value_mut(w0).data_mut().copy_from_slice(&[1.0, 2.0, -1.0, 0.5]);

    let mol = parse_smiles("CO").unwrap();
    let got = molfuse::mol::molecule_vector(&store, &MolEncoder::Nfp(model), &mol, &[1, 2]).unwrap();

    let softmax2 = |a: f64, b: f64| {
        let (ea, eb) = (a.exp(), b.exp());
        [ea / (ea + eb), eb / (ea + eb)]
    };
    // W0 * e1 = (0.3*1 + -0.1*2, 0.3*-1 + -0.1*0.5), W0 * e2 likewise.
    let p1 = softmax2(0.3 - 0.2, -0.3 - 0.05);
    let p2 = softmax2(-0.4 + 0.4, 0.4 + 0.1);
    for i in 0..2 {
        assert!((got[i] - (p1[i] + p2[i])).abs() < 1e-12);
    }
}

// ── gated encoder ──────────────────────────────────────────────────────

#[test]
fn ggnn_zero_weights_give_zero_vector() {
    let mut rng = EngineRng::from_seed(1);
    let mut store = ParamStore::new();
    let model = GgnnModel::init(&mut store, &mut rng, 3, 4, 2);
    zero_all(&mut store);

    let mol = parse_smiles("[Na+]").unwrap();
    let out = molfuse::mol::molecule_vector(&store, &MolEncoder::Ggnn(model), &mol, &[1]).unwrap();
    assert_eq!(out, vec![0.0; 4]);
}

#[test]
fn ggnn_is_permutation_invariant() {
    let mut rng = EngineRng::from_seed(6);
    let mut store = ParamStore::new();
    let vocab = shared_vocab();
    let model = MolEncoder::Ggnn(GgnnModel::init(&mut store, &mut rng, vocab.size(), 8, 3));

    let mol = parse_smiles("CC(=O)Oc1ccccc1C(=O)O").unwrap();
    let ids = vocab.ids_for(&mol, false).unwrap();
    let base = molfuse::mol::molecule_vector(&store, &model, &mol, &ids).unwrap();

    let mut rng2 = EngineRng::from_seed(17);
    let mut perm: Vec<usize> = (0..mol.atom_count()).collect();
    rng2.shuffle(&mut perm);
    let relabeled = mol.relabel(&perm);
    let mut relabeled_ids = vec![0; ids.len()];
    for (old, &new) in perm.iter().enumerate() {
        relabeled_ids[new] = ids[old];
    }
    let permuted = molfuse::mol::molecule_vector(&store, &model, &relabeled, &relabeled_ids).unwrap();
    assert!(max_abs_diff(&base, &permuted) < 1e-9);
}

#[test]
fn ggnn_is_sensitive_to_bond_type() {
    let mut rng = EngineRng::from_seed(8);
    let mut store = ParamStore::new();
    let vocab = shared_vocab();
    let model = MolEncoder::Ggnn(GgnnModel::init(&mut store, &mut rng, vocab.size(), 6, 2));
    let single = encode_with(&store, &model, &vocab, "CO");
    let double = encode_with(&store, &model, &vocab, "C=O");
    assert!(max_abs_diff(&single, &double) > 1e-6);
}

#[test]
fn ggnn_bond_order_does_not_matter() {
    let mut rng = EngineRng::from_seed(12);
    let mut store = ParamStore::new();
    let vocab = shared_vocab();
    let model = MolEncoder::Ggnn(GgnnModel::init(&mut store, &mut rng, vocab.size(), 5, 2));

    let mol = parse_smiles("CC(O)CN").unwrap();
    let ids = vocab.ids_for(&mol, false).unwrap();
    let base = molfuse::mol::molecule_vector(&store, &model, &mol, &ids).unwrap();

    let mut reordered = mol.clone();
    reordered.bonds.reverse();
    let shuffled = molfuse::mol::molecule_vector(&store, &model, &reordered, &ids).unwrap();
    assert!(max_abs_diff(&base, &shuffled) < 1e-9);
}

// ── pair vectors and classifier ────────────────────────────────────────

#[test]
fn unmatched_pair_encodes_to_zero() {
    let mut rng = EngineRng::from_seed(2);
    let mut store = ParamStore::new();
    let model = MolEncoder::Nfp(NfpModel::init(&mut store, &mut rng, 3, 4, 1));
    let mut g = Graph::new();
    let pair = encode_pair(&mut g, &store, &model, None, None).unwrap();
    assert_eq!(g.value(pair).data(), &[0.0; 8]);
}

#[test]
fn swapping_sides_swaps_halves_exactly() {
    let mut rng = EngineRng::from_seed(4);
    let mut store = ParamStore::new();
    let vocab = shared_vocab();
    let model = MolEncoder::Nfp(NfpModel::init(&mut store, &mut rng, vocab.size(), 3, 2));

    let a = parse_smiles("CO").unwrap();
    let b = parse_smiles("CN").unwrap();
    let a_ids = vocab.ids_for(&a, false).unwrap();
    let b_ids = vocab.ids_for(&b, false).unwrap();

    let mut g = Graph::new();
    let ab = encode_pair(&mut g, &store, &model, Some((&a, &a_ids)), Some((&b, &b_ids))).unwrap();
    let ba = encode_pair(&mut g, &store, &model, Some((&b, &b_ids)), Some((&a, &a_ids))).unwrap();
    let ab = g.value(ab).data();
    let ba = g.value(ba).data();
    assert_eq!(&ab[0..3], &ba[3..6]);
    assert_eq!(&ab[3..6], &ba[0..3]);
}

#[test]
fn default_molecular_vector_size_yields_pair_dim_100() {
    let mut rng = EngineRng::from_seed(4);
    let mut store = ParamStore::new();
    let model = MolEncoder::Ggnn(GgnnModel::init(&mut store, &mut rng, 5, 50, 4));
    let mut g = Graph::new();
    let pair = encode_pair(&mut g, &store, &model, None, None).unwrap();
    assert_eq!(g.value(pair).shape(), &[100]);
}

#[test]
fn zero_classifier_is_uniform() {
    let mut rng = EngineRng::from_seed(3);
    let mut store = ParamStore::new();
    let cls = MolPairClassifier::init(&mut store, &mut rng, 8, 5);
    zero_all(&mut store);
    let mut g = Graph::new();
    let input = g.constant(Tensor::vector(vec![0.3; 8]));
    let probs = cls.classify(&mut g, &store, input).unwrap();
    assert_eq!(g.value(probs).data(), &[0.5, 0.5]);
}

#[test]
fn classifier_output_is_a_distribution() {
    let mut rng = EngineRng::from_seed(31);
    let mut store = ParamStore::new();
    let cls = MolPairClassifier::init(&mut store, &mut rng, 6, 7);
    let mut g = Graph::new();
    let input = g.constant(Tensor::vector(vec![0.9, -1.4, 0.2, 2.0, -0.7, 0.05]));
    let probs = cls.classify(&mut g, &store, input).unwrap();
    let data = g.value(probs).data();
    assert!(data.iter().all(|&p| p >= 0.0));
    assert!((data.iter().sum::<f64>() - 1.0).abs() < 1e-9);
}

/// First-run output locked as a regression guard for the full
/// encode-pair-classify path under a fixed seed.
#[test]
fn seeded_classifier_output_is_locked() {
    let mut rng = EngineRng::from_seed(4242);
    let mut store = ParamStore::new();
    let vocab = shared_vocab();
    let model = MolEncoder::Nfp(NfpModel::init(&mut store, &mut rng, vocab.size(), 4, 2));
    let cls = MolPairClassifier::init(&mut store, &mut rng, 8, 6);

    let a = parse_smiles("CCO").unwrap();
    let b = parse_smiles("NC=O").unwrap();
    let a_ids = vocab.ids_for(&a, false).unwrap();
    let b_ids = vocab.ids_for(&b, false).unwrap();
    let mut g = Graph::new();
    let pair = encode_pair(&mut g, &store, &model, Some((&a, &a_ids)), Some((&b, &b_ids))).unwrap();
    let probs = cls.classify(&mut g, &store, pair).unwrap();
    let got = g.value(probs).data().to_vec();
    assert_eq!(got[0].to_bits(), 4600250765608304712);
    assert_eq!(got[1].to_bits(), 4603892845954818012);
    assert!((got[0] + got[1] - 1.0).abs() < 1e-12);
}

// ── gradients ──────────────────────────────────────────────────────────

fn pair_loss_check(kind: GraphEncoderKind, seed: u64) -> f64 {
    let mut rng = EngineRng::from_seed(seed);
    let mut store = ParamStore::new();
    let vocab = shared_vocab();
    let encoder = MolEncoder::init(kind, &mut store, &mut rng, vocab.size(), 3, 2);
    let cls = MolPairClassifier::init(&mut store, &mut rng, 6, 4);

    let a = parse_smiles("C=O").unwrap();
    let b = parse_smiles("c1ccccc1").unwrap();
    let a_ids = vocab.ids_for(&a, false).unwrap();
    let b_ids = vocab.ids_for(&b, false).unwrap();

    gradient_check_params(
        &mut store,
        |g, store| {
            let pair = encode_pair(g, store, &encoder, Some((&a, &a_ids)), Some((&b, &b_ids)))
                .map_err(|e| match e {
                    molfuse::mol::ModelError::Tensor(t) => t,
                    other => panic!("unexpected model error: {other}"),
                })?;
            let probs = cls.classify(g, store, pair)?;
            let row = g.reshape(probs, vec![1, 2])?;
            g.cross_entropy(row, &[1])
        },
        1e-5,
    )
    .unwrap()
}

#[test]
fn nfp_end_to_end_gradient_check() {
    let err = pair_loss_check(GraphEncoderKind::Nfp, 100);
    assert!(err < 1e-4, "max relative error {err}");
}

#[test]
fn ggnn_end_to_end_gradient_check() {
    let err = pair_loss_check(GraphEncoderKind::Ggnn, 101);
    assert!(err < 1e-4, "max relative error {err}");
}

#[test]
fn l2_normalize_keeps_zero_and_scales_out() {
    let mut zero = vec![0.0; 4];
    l2_normalize(&mut zero);
    assert_eq!(zero, vec![0.0; 4]);

    let mut v = vec![3.0, 4.0];
    l2_normalize(&mut v);
    assert!((v[0] - 0.6).abs() < 1e-15 && (v[1] - 0.8).abs() < 1e-15);

    let mut scaled = vec![30.0, 40.0];
    l2_normalize(&mut scaled);
    assert_eq!(v, scaled);
}
