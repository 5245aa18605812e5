//! End-to-end model behavior on small synthetic datasets: forward
//! contracts, loss oracles, gradient checks, and training-loop control
//! flow.

use aaip_core::basis::{BasisConfig, SphericalTable};
use aaip_core::gradcheck::check_gradients;
use aaip_core::graph::{build_structural_graph, StructuralGraph};
use aaip_core::model::{
    loss_affinity, loss_neutralization, train, Dataset, InteractionModel, LossConfig,
    ModelConfig, ModelError, PairData, Task, TrainConfig,
};
use aaip_core::nn::{restore_into, Tape, Tensor};
use aaip_core::rng::SplitMix64;
use aaip_core::structure::{Atom, ProteinStructure, Residue};
use aaip_core::vec3::Vec3;

fn small_basis() -> BasisConfig {
    BasisConfig { cutoff: 10.0, num_radial: 2, num_spherical: 2, envelope_exponent: 6, envelope_enabled: true }
}

fn small_config(task: Task) -> ModelConfig {
    ModelConfig {
        task,
        embed_dim: 3,
        hidden: 4,
        gat_layers: 1,
        gcn_layers: 1,
        dropout: 0.0,
        s: 1.0,
        seq_dim: 3,
        knn_k: 4,
        basis: small_basis(),
        use_structure: true,
        use_sequence: true,
        use_smlp: true,
        sequence_only: false,
    }
}

/// Zig-zag chain with full N/CA/C backbones; consecutive anchors 3.8 A
/// apart so the radius graph is connected.
fn synthetic_structure(id: &str, n: usize, jitter_seed: u64) -> ProteinStructure {
    let mut rng = SplitMix64::new(jitter_seed);
    let names = ["ALA", "ARG", "SER", "GLY", "LEU"];
    let residues = (0..n)
        .map(|i| {
            let ca = Vec3::new(
                3.8 * i as f64 + rng.uniform(-0.2, 0.2),
                if i % 2 == 0 { 0.5 } else { -0.5 },
                rng.uniform(-0.3, 0.3),
            );
            Residue {
                index: i,
                name: names[i % names.len()].into(),
                atoms: vec![
                    Atom { name: "N".into(), position: ca + Vec3::new(1.2, 0.2, 0.1), element: "N".into() },
                    Atom { name: "CA".into(), position: ca, element: "C".into() },
                    Atom { name: "C".into(), position: ca + Vec3::new(0.1, 1.0, 0.4), element: "C".into() },
                ],
                anchor: ca,
            }
        })
        .collect();
    ProteinStructure { id: id.into(), chains: vec![("A".into(), residues)] }
}

fn synthetic_graph(id: &str, n: usize, seed: u64, cfg: &BasisConfig) -> StructuralGraph {
    let table = SphericalTable::new(cfg);
    build_structural_graph(&synthetic_structure(id, n, seed), cfg, &table).unwrap()
}

fn embed(center: f64, dim: usize, rng: &mut SplitMix64) -> Vec<f64> {
    (0..dim).map(|_| center + rng.uniform(-0.1, 0.1)).collect()
}

/// `n` pairs alternating between two well-separated embedding classes.
fn synthetic_dataset(n: usize, cfg: &ModelConfig, seed: u64) -> Dataset {
    let mut rng = SplitMix64::new(seed);
    let pairs = (0..n)
        .map(|i| {
            let positive = i % 2 == 0;
            let c = if positive { 1.0 } else { -1.0 };
            let label = match cfg.task {
                Task::Affinity => {
                    if positive { -12.0 } else { -6.0 }
                }
                Task::Neutralization => {
                    if positive { 1.0 } else { 0.0 }
                }
            };
            PairData {
                pair_id: format!("p{i}"),
                heavy_pooled: embed(c, cfg.seq_dim, &mut rng),
                light_pooled: Some(embed(c * 0.5, cfg.seq_dim, &mut rng)),
                ag_pooled: embed(-c, cfg.seq_dim, &mut rng),
                ab_graph: Some(synthetic_graph(&format!("ab{i}"), 5, 100 + i as u64, &cfg.basis)),
                ag_graph: Some(synthetic_graph(&format!("ag{i}"), 4, 200 + i as u64, &cfg.basis)),
                label,
            }
        })
        .collect();
    Dataset::new(pairs)
}

#[test]
fn zeroed_final_layer_gives_constant_prediction() {
    let cfg = small_config(Task::Affinity);
    let ds = synthetic_dataset(4, &cfg, 1);
    let model = InteractionModel::new(cfg, 7);
    model.head_w2.set_value(Tensor::zeros(model.head_w2.value().rows, 1));
    model.head_b2.set_value(Tensor::scalar(0.37));
    let preds = model.predict(&ds, &[0, 1, 2, 3]).unwrap();
    for p in preds {
        assert_eq!(p, 0.37);
    }
}

#[test]
fn identical_pairs_get_identical_predictions() {
    // Large knn_k disables sparsification; with truncating kNN, ties among
    // duplicate entities can break asymmetrically.
    let mut cfg = small_config(Task::Affinity);
    cfg.knn_k = 64;
    let mut ds = synthetic_dataset(3, &cfg, 2);
    let mut dup = ds.pairs[0].clone();
    dup.pair_id = "p_dup".into();
    ds.pairs.push(dup);
    let ds = Dataset::new(ds.pairs);
    let model = InteractionModel::new(cfg, 8);
    let preds = model.predict(&ds, &[0, 1, 2, 3]).unwrap();
    assert_eq!(preds[0].to_bits(), preds[3].to_bits());

    // Re-running is bit-identical too.
    let again = model.predict(&ds, &[0, 1, 2, 3]).unwrap();
    for (a, b) in preds.iter().zip(&again) {
        assert_eq!(a.to_bits(), b.to_bits());
    }
}

#[test]
fn missing_structure_handling() {
    let cfg = small_config(Task::Affinity);
    let mut ds = synthetic_dataset(2, &cfg, 3);
    ds.pairs[1].ab_graph = None;
    let ds = Dataset::new(ds.pairs);
    let model = InteractionModel::new(cfg.clone(), 9);
    assert_eq!(
        model.predict(&ds, &[0, 1]).unwrap_err(),
        ModelError::MissingModality { pair_id: "p1".into() }
    );

    let mut seq_only = cfg;
    seq_only.sequence_only = true;
    let model = InteractionModel::new(seq_only, 9);
    model.predict(&ds, &[0, 1]).unwrap();
}

#[test]
fn affinity_loss_matches_loop_oracle() {
    let cfg = small_config(Task::Affinity);
    let ds = synthetic_dataset(3, &cfg, 4);
    let model = InteractionModel::new(cfg, 10);
    let relations = model.build_relations(&ds).unwrap();
    let lc = LossConfig { lambda: 3e-3, lambda1: 2e-3, lambda2: 1e-3 };

    let preds = vec![0.3, -0.7, 1.1];
    let labels = vec![0.5, -0.5, 0.9];
    let t = Tape::new();
    let pid = t.constant(Tensor::from_rows(3, 1, preds.clone()));
    let loss = t.value(loss_affinity(&t, pid, &labels, &model, Some(&relations), &lc).unwrap()).data[0];

    let mut want: f64 = preds.iter().zip(&labels).map(|(p, y)| (y - p) * (y - p)).sum();
    let l1 = |g: &aaip_core::graph::RelationGraph| -> f64 {
        g.neighbors.iter().flatten().map(|(_, w)| w.abs()).sum()
    };
    want += lc.lambda1 * l1(&relations.0) + lc.lambda2 * l1(&relations.1);
    for w in model.weight_params() {
        want += lc.lambda * w.value().data.iter().map(|v| v * v).sum::<f64>();
    }
    assert!((loss - want).abs() < 1e-12, "loss {loss} vs oracle {want}");
}

#[test]
fn affinity_loss_trivial_cases() {
    let cfg = small_config(Task::Affinity);
    let model = InteractionModel::new(cfg, 11);
    let off = LossConfig { lambda: 0.0, lambda1: 0.0, lambda2: 0.0 };
    let t = Tape::new();

    let perfect = t.constant(Tensor::from_rows(2, 1, vec![1.0, -2.0]));
    let l = t.value(loss_affinity(&t, perfect, &[1.0, -2.0], &model, None, &off).unwrap()).data[0];
    assert_eq!(l, 0.0);

    let one = t.constant(Tensor::from_rows(1, 1, vec![0.0]));
    let l = t.value(loss_affinity(&t, one, &[1.0], &model, None, &off).unwrap()).data[0];
    assert_eq!(l, 1.0);

    assert_eq!(
        loss_affinity(&t, one, &[1.0, 2.0], &model, None, &off).unwrap_err(),
        ModelError::LengthMismatch
    );
}

#[test]
fn neutralization_loss_closed_forms_and_oracle() {
    let cfg = small_config(Task::Neutralization);
    let ds = synthetic_dataset(3, &cfg, 6);
    let model = InteractionModel::new(cfg, 12);
    let off = LossConfig { lambda: 0.0, lambda1: 0.0, lambda2: 0.0 };
    let t = Tape::new();

    // Logit 0 -> probability 0.5 -> loss ln 2 for either label.
    let half = t.constant(Tensor::from_rows(1, 1, vec![0.0]));
    for y in [0.0, 1.0] {
        let l = t.value(loss_neutralization(&t, half, &[y], &model, None, &off).unwrap()).data[0];
        assert!((l - core::f64::consts::LN_2).abs() < 1e-12);
    }

    // Confident correct logits: loss per sample at the clamp floor.
    let sure = t.constant(Tensor::from_rows(2, 1, vec![40.0, -40.0]));
    let l = t.value(loss_neutralization(&t, sure, &[1.0, 0.0], &model, None, &off).unwrap()).data[0];
    assert!(l / 2.0 < 1e-6);

    // Random case against a scalar loop oracle with penalties on.
    let relations = model.build_relations(&ds).unwrap();
    let lc = LossConfig { lambda: 1e-3, lambda1: 2e-3, lambda2: 3e-3 };
    let logits = vec![0.7, -1.2, 0.1];
    let labels = vec![1.0, 0.0, 0.0];
    let lid = t.constant(Tensor::from_rows(3, 1, logits.clone()));
    let loss =
        t.value(loss_neutralization(&t, lid, &labels, &model, Some(&relations), &lc).unwrap()).data[0];
    let mut want = 0.0;
    for (z, y) in logits.iter().zip(&labels) {
        let p = (1.0 / (1.0 + (-z).exp())).clamp(1e-7, 1.0 - 1e-7);
        want -= y * p.ln() + (1.0 - y) * (1.0 - p).ln();
    }
    let l1 = |g: &aaip_core::graph::RelationGraph| -> f64 {
        g.neighbors.iter().flatten().map(|(_, w)| w.abs()).sum()
    };
    want += lc.lambda1 * l1(&relations.0) + lc.lambda2 * l1(&relations.1);
    for w in model.weight_params() {
        want += lc.lambda * w.value().data.iter().map(|v| v * v).sum::<f64>();
    }
    assert!((loss - want).abs() < 1e-12, "loss {loss} vs oracle {want}");
}

#[test]
fn full_model_gradients_match_finite_differences() {
    let cfg = small_config(Task::Affinity);
    let ds = synthetic_dataset(3, &cfg, 7);
    let model = InteractionModel::new(cfg, 13);
    let relations = model.build_relations(&ds).unwrap();
    let labels = vec![0.4, -0.9, 0.2];
    let lc = LossConfig { lambda: 1e-3, lambda1: 1e-3, lambda2: 1e-3 };
    let params = model.params();

    let eval = |with_grad: bool| {
        let t = Tape::new();
        let mut rng = SplitMix64::new(3);
        let preds = model.forward_batch(&t, &ds, &[0, 1, 2], Some(&relations), &mut rng, true).unwrap();
        let loss = loss_affinity(&t, preds, &labels, &model, Some(&relations), &lc).unwrap();
        if with_grad {
            t.backward(loss);
        }
        t.value(loss).data[0]
    };
    check_gradients(&params, || eval(false), || eval(true), 1e-5, 1e-5)
        .unwrap_or_else(|bad| panic!("model gradient mismatch: {:?}", &bad[..bad.len().min(3)]));
}

#[test]
fn neutralization_gradients_match_finite_differences() {
    let cfg = small_config(Task::Neutralization);
    let ds = synthetic_dataset(3, &cfg, 8);
    let model = InteractionModel::new(cfg, 14);
    let relations = model.build_relations(&ds).unwrap();
    let labels = vec![1.0, 0.0, 1.0];
    let lc = LossConfig::default();
    let params = model.params();
    let eval = |with_grad: bool| {
        let t = Tape::new();
        let mut rng = SplitMix64::new(4);
        let preds = model.forward_batch(&t, &ds, &[0, 1, 2], Some(&relations), &mut rng, true).unwrap();
        let loss = loss_neutralization(&t, preds, &labels, &model, Some(&relations), &lc).unwrap();
        if with_grad {
            t.backward(loss);
        }
        t.value(loss).data[0]
    };
    check_gradients(&params, || eval(false), || eval(true), 1e-5, 1e-5)
        .unwrap_or_else(|bad| panic!("model gradient mismatch: {:?}", &bad[..bad.len().min(3)]));
}

#[test]
fn frozen_validation_stops_after_patience_plus_one() {
    let cfg = small_config(Task::Affinity);
    let ds = synthetic_dataset(6, &cfg, 9);
    let mut model = InteractionModel::new(cfg, 15);
    let tc = TrainConfig { lr: 0.0, epochs: 50, patience: 5, batch: 4, seed: 1, loss: LossConfig::default() };
    let report = train(&mut model, &ds, &[0, 1, 2, 3], &[4, 5], &tc).unwrap();
    assert_eq!(report.history.len(), 6);
    assert_eq!(report.best_epoch, 0);
}

#[test]
fn training_is_deterministic_per_seed() {
    let run = || {
        let cfg = small_config(Task::Affinity);
        let ds = synthetic_dataset(6, &cfg, 10);
        let mut model = InteractionModel::new(cfg, 16);
        let tc = TrainConfig { lr: 1e-3, epochs: 4, patience: 5, batch: 3, seed: 2, loss: LossConfig::default() };
        let report = train(&mut model, &ds, &[0, 1, 2, 3], &[4, 5], &tc).unwrap();
        (report.history, report.checkpoint)
    };
    let (h1, c1) = run();
    let (h2, c2) = run();
    assert_eq!(h1, h2);
    assert_eq!(c1, c2);
}

#[test]
fn checkpoint_restores_into_fresh_model() {
    let cfg = small_config(Task::Affinity);
    let ds = synthetic_dataset(6, &cfg, 11);
    let mut model = InteractionModel::new(cfg.clone(), 17);
    let tc = TrainConfig { lr: 1e-3, epochs: 3, patience: 5, batch: 3, seed: 3, loss: LossConfig::default() };
    let report = train(&mut model, &ds, &[0, 1, 2, 3], &[4, 5], &tc).unwrap();
    let preds = model.predict(&ds, &[0, 1, 2]).unwrap();

    let fresh = InteractionModel::new(cfg, 999);
    restore_into(&fresh.checkpoint_params(), &report.checkpoint).unwrap();
    let again = fresh.predict(&ds, &[0, 1, 2]).unwrap();
    for (a, b) in preds.iter().zip(&again) {
        assert_eq!(a.to_bits(), b.to_bits());
    }
}

#[test]
fn adjacency_penalty_shrinks_with_smaller_k() {
    let cfg = small_config(Task::Affinity);
    let ds = synthetic_dataset(8, &cfg, 12);
    let wide = InteractionModel::new(cfg.clone(), 18);
    let mut narrow_cfg = cfg;
    narrow_cfg.knn_k = 1;
    let narrow = InteractionModel::new(narrow_cfg, 18);
    let (ab_wide, _) = wide.build_relations(&ds).unwrap();
    let (ab_narrow, _) = narrow.build_relations(&ds).unwrap();
    assert!(ab_narrow.l1_norm() < ab_wide.l1_norm());
}

#[test]
fn ablation_modes_train_with_finite_losses() {
    for (structure, sequence, smlp) in [(false, true, true), (true, false, true), (true, true, false)] {
        let mut cfg = small_config(Task::Affinity);
        cfg.use_structure = structure;
        cfg.use_sequence = sequence;
        cfg.use_smlp = smlp;
        let ds = synthetic_dataset(6, &cfg, 13);
        let mut model = InteractionModel::new(cfg, 19);
        let tc = TrainConfig { lr: 1e-3, epochs: 2, patience: 5, batch: 3, seed: 4, loss: LossConfig::default() };
        let report = train(&mut model, &ds, &[0, 1, 2, 3], &[4, 5], &tc).unwrap();
        for e in &report.history {
            assert!(e.train_loss.is_finite() && e.val_loss.is_finite());
        }
    }
}

#[test]
fn empty_split_is_rejected() {
    let cfg = small_config(Task::Affinity);
    let ds = synthetic_dataset(4, &cfg, 14);
    let mut model = InteractionModel::new(cfg, 20);
    let tc = TrainConfig::default();
    assert_eq!(train(&mut model, &ds, &[], &[0], &tc).unwrap_err(), ModelError::EmptySplit);
    assert_eq!(train(&mut model, &ds, &[0], &[], &tc).unwrap_err(), ModelError::EmptySplit);
}
