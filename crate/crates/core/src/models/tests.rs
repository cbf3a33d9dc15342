use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::*;
use crate::graph::{featurize, random_molecule, synthetic_dataset, EdgeRule, GraphBatch, MolGraph, SYNTHETIC_TARGET};
use crate::so3::random_rotation;
use crate::tensor::{finite_diff_check, Tape, Tensor};
use crate::Error;

fn small(model: ModelKind) -> ModelConfig {
    ModelConfig { num_layers: 2, channels: 4, num_degrees: 2, heads: 2, model, ..ModelConfig::default() }
}

fn graphs(count: usize, min: usize, max: usize, seed: u64) -> Vec<MolGraph> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    synthetic_dataset(&mut rng, count, min, max)
        .iter()
        .map(|m| featurize(m, EdgeRule::Full, &Default::default()).unwrap())
        .collect()
}

fn target() -> Vec<String> {
    vec![SYNTHETIC_TARGET.to_string()]
}

#[test]
fn single_atom_graph_has_defined_output() {
    for kind in [ModelKind::Se3t, ModelKind::Tfn] {
        let cfg = ModelConfig { tasks: 3, ..small(kind) };
        let model = Model::new(&cfg).unwrap();
        let params = model.init_params(1);
        let g = &graphs(1, 1, 1, 2)[0];
        let out = model.predict_one(&params, g).unwrap();
        assert_eq!(out.len(), 3);
        assert!(out.iter().all(|v| v.is_finite()));
        let free = match kind {
            ModelKind::Se3t => se3_transformer_forward(&cfg, &params, g),
            ModelKind::Tfn => tfn_forward(&cfg, &params, g),
        };
        assert_eq!(free.unwrap(), out);
    }
    let cfg = small(ModelKind::Tfn);
    let params = Model::new(&cfg).unwrap().init_params(0);
    assert!(matches!(se3_transformer_forward(&cfg, &params, &graphs(1, 2, 2, 0)[0]), Err(Error::Config(_))));
}

#[test]
fn predictions_are_rototranslation_invariant() {
    for kind in [ModelKind::Se3t, ModelKind::Tfn] {
        let opts = EquivarianceOptions { model: kind, atoms: 6, degrees: 3, channels: 4, heads: 2, trials: 4, ..Default::default() };
        let report = check_equivariance(&opts).unwrap();
        assert!(report.passed(), "{}", report.render());
        assert_eq!(report.stages[0].stage, KERNEL_STAGE);
        assert!(report.stages.iter().any(|s| s.stage == "output[0]"));
    }
}

#[test]
fn corrupted_basis_is_caught_at_the_kernel() {
    let opts = EquivarianceOptions { atoms: 4, degrees: 2, channels: 4, heads: 2, trials: 2, sabotage: true, ..Default::default() };
    let report = check_equivariance(&opts).unwrap();
    assert_eq!(report.first_violation().unwrap().stage, KERNEL_STAGE);
    assert!(report.render().contains("FAIL: stage pairwise_conv"));
}

#[test]
fn zero_trials_and_too_few_atoms() {
    let report = check_equivariance(&EquivarianceOptions { trials: 0, ..Default::default() }).unwrap();
    assert!(report.passed());
    assert_eq!(report.render(), "no trials\n");
    assert!(check_equivariance(&EquivarianceOptions { atoms: 1, ..Default::default() }).is_err());
}

#[test]
fn predictions_are_exactly_permutation_invariant() {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let mol = random_molecule(&mut rng, 7);
    for kind in [ModelKind::Se3t, ModelKind::Tfn] {
        for pooling in [crate::layers::Pooling::Max, crate::layers::Pooling::Avg] {
            let cfg = ModelConfig { pooling, ..small(kind) };
            let model = Model::new(&cfg).unwrap();
            let params = model.init_params(6);
            let base = model.predict_one(&params, &featurize(&mol, EdgeRule::Full, &Default::default()).unwrap()).unwrap();
            let perm = [4, 2, 6, 0, 1, 5, 3];
            let g = featurize(&mol.permuted(&perm), EdgeRule::Full, &Default::default()).unwrap();
            assert_eq!(model.predict_one(&params, &g).unwrap(), base);
        }
    }
}

#[test]
fn tfn_with_zero_radial_and_identity_self_interaction_is_identity() {
    let cfg = ModelConfig { num_layers: 3, channels: 6, num_degrees: 2, model: ModelKind::Tfn, ..ModelConfig::default() };
    let model = Model::new(&cfg).unwrap();
    let mut params = model.init_params(7);
    for (name, t) in params.iter_mut() {
        if name.contains(".radial.") {
            t.data_mut().iter_mut().for_each(|v| *v = 0.0);
        }
        if name.starts_with("layer") && name.contains(".self.0") {
            let n = t.shape()[1];
            t.data_mut().iter_mut().enumerate().for_each(|(i, v)| *v = if i / n == i % n { 1.0 } else { 0.0 });
        }
    }
    let g = &graphs(1, 5, 5, 8)[0];
    let batch = GraphBatch::new(&[g]).unwrap();
    let mut tape = Tape::new();
    let ctx = model.context(&mut tape, &batch).unwrap();
    let trace = model.trace(&mut tape, &params, &batch, &ctx).unwrap();
    let input = tape.value(trace.stages[0].1.get(0).unwrap()).clone();
    let last = trace.stages.iter().find(|(n, _)| n == "layer2.norm").unwrap();
    let out = tape.value(last.1.get(0).unwrap());
    assert!(input.max_abs_diff(out) <= 1e-12);
    assert_eq!(tape.value(trace.output).shape(), &[1, 1]);
}

fn full_model_fd(kind: ModelKind) -> f64 {
    let cfg = ModelConfig { num_layers: 1, channels: 4, num_degrees: 2, heads: 2, model: kind, ..ModelConfig::default() };
    let model = Model::new(&cfg).unwrap();
    let params = model.init_params(9);
    let g = &graphs(1, 3, 3, 10)[0];
    let batch = GraphBatch::new(&[g]).unwrap();
    let target = Tensor::new(vec![1, 1], vec![0.3]).unwrap();
    finite_diff_check(&params, 1e-4, |t, p| {
        let out = model.forward(t, p, &batch)?;
        t.mse_loss(out, &target)
    })
    .unwrap()
}

#[test]
fn full_model_gradients_match_finite_differences() {
    for kind in [ModelKind::Se3t, ModelKind::Tfn] {
        let err = full_model_fd(kind);
        assert!(err <= 1e-4, "{kind}: {err:e}");
    }
}

#[test]
fn zero_epochs_return_initial_params() {
    let cfg = small(ModelKind::Tfn);
    let data = graphs(4, 2, 4, 11);
    let tc = TrainConfig { epochs: 0, seed: 3, ..TrainConfig::default() };
    let out = train(&cfg, &tc, &data, &[], &target(), |_| {}).unwrap();
    assert!(out.metrics.is_empty());
    assert_eq!(out.params, Model::new(&cfg).unwrap().init_params(3));
    assert!(matches!(train(&cfg, &tc, &[], &[], &target(), |_| {}), Err(Error::Training(_))));
}

#[test]
fn equal_seeds_give_identical_params() {
    let cfg = small(ModelKind::Se3t);
    let data = graphs(6, 2, 4, 12);
    let tc = TrainConfig { epochs: 2, batch_size: 4, seed: 9, ..TrainConfig::default() };
    let a = train(&cfg, &tc, &data[..4], &data[4..], &target(), |_| {}).unwrap();
    let b = train(&cfg, &tc, &data[..4], &data[4..], &target(), |_| {}).unwrap();
    assert_eq!(a.params, b.params);
    assert_eq!(a.metrics.len(), 2);
    let c = train(&cfg, &TrainConfig { seed: 10, ..tc }, &data[..4], &data[4..], &target(), |_| {}).unwrap();
    assert_ne!(a.params, c.params);
}

#[test]
fn overfits_small_dataset() {
    let cfg = ModelConfig { num_layers: 1, channels: 4, num_degrees: 2, model: ModelKind::Tfn, ..ModelConfig::default() };
    let data = graphs(16, 4, 4, 13);
    let tc = TrainConfig { epochs: 300, batch_size: 16, learning_rate: 3e-3, seed: 1, ..TrainConfig::default() };
    let out = train(&cfg, &tc, &data, &[], &target(), |_| {}).unwrap();
    let first = out.metrics[0].train_loss;
    let last = out.metrics.last().unwrap().train_loss;
    assert!(last * 10.0 <= first, "train MAE {first} -> {last}");
}

#[test]
fn save_load_round_trip_is_exact() {
    let cfg = small(ModelKind::Se3t);
    let data = graphs(3, 2, 5, 14);
    let model = Model::new(&cfg).unwrap();
    let refs: Vec<&MolGraph> = data.iter().collect();
    let stats = LabelStats::fit(&refs, &target()).unwrap();
    let saved = SavedModel::new(cfg.clone(), &stats, model.init_params(15));
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("params.json");
    save_params(&path, &saved).unwrap();
    let first = std::fs::read(&path).unwrap();
    let loaded = load_params(&path).unwrap();
    assert_eq!(loaded, saved);
    save_params(&path, &loaded).unwrap();
    assert_eq!(std::fs::read(&path).unwrap(), first);
    for g in &data {
        assert_eq!(saved.predict(&model, g).unwrap(), loaded.predict(&loaded.model().unwrap(), g).unwrap());
    }

    let mut wrong = serde_json::to_value(&saved).unwrap();
    wrong["config"]["num_degrees"] = serde_json::json!(3);
    match SavedModel::from_json(&wrong.to_string()) {
        Err(Error::Param { name, .. }) => assert_eq!(name, "final_conv.conv.2_0.radial.0.bias"),
        other => panic!("{other:?}"),
    }
}

#[test]
fn threaded_prediction_matches_serial() {
    let cfg = small(ModelKind::Tfn);
    let data = graphs(7, 2, 5, 16);
    let refs: Vec<&MolGraph> = data.iter().collect();
    let stats = LabelStats::fit(&refs, &target()).unwrap();
    let saved = SavedModel::new(cfg.clone(), &stats, Model::new(&cfg).unwrap().init_params(17));
    assert_eq!(predict(&saved, &data, 1).unwrap(), predict(&saved, &data, 3).unwrap());
}

#[test]
fn split_is_seeded_and_complete() {
    let s = split_dataset(25, 4);
    assert_eq!((s.train.len(), s.val.len(), s.test.len()), (21, 2, 2));
    let mut all: Vec<usize> = s.train.iter().chain(&s.val).chain(&s.test).copied().collect();
    all.sort();
    assert_eq!(all, (0..25).collect::<Vec<_>>());
    assert_eq!(split_dataset(25, 4), s);
    assert_ne!(split_dataset(25, 5), s);
}

#[test]
fn adam_first_step_moves_by_learning_rate() {
    let mut p = crate::tensor::ParamStore::new();
    p.insert("w", Tensor::new(vec![2], vec![1.0, -1.0]).unwrap());
    let mut g = crate::tensor::Gradients::new();
    g.insert("w".into(), Tensor::new(vec![2], vec![0.5, -2.0]).unwrap());
    let mut adam = Adam::new(&TrainConfig { learning_rate: 0.1, ..TrainConfig::default() });
    adam.step(&mut p, &g);
    // bias-corrected first step is lr * g / (|g| + eps)
    let w = p.get("w").unwrap().data();
    assert!((w[0] - (1.0 - 0.1 * 0.5 / (0.5 + 1e-8))).abs() < 1e-15);
    assert!((w[1] - (-1.0 + 0.1 * 2.0 / (2.0 + 1e-8))).abs() < 1e-15);
}

#[test]
fn rotated_training_data_gives_the_same_losses() {
    let cfg = small(ModelKind::Tfn);
    let mut rng = ChaCha8Rng::seed_from_u64(18);
    let mols = synthetic_dataset(&mut rng, 6, 3, 5);
    let rot = random_rotation(&mut rng);
    let plain: Vec<MolGraph> = mols.iter().map(|m| featurize(m, EdgeRule::Full, &Default::default()).unwrap()).collect();
    let turned: Vec<MolGraph> = mols
        .iter()
        .map(|m| {
            let mut t = m.transformed(&rot, [1.0, 2.0, 3.0]);
            t.labels = m.labels.clone();
            featurize(&t, EdgeRule::Full, &Default::default()).unwrap()
        })
        .collect();
    let tc = TrainConfig { epochs: 3, batch_size: 3, seed: 2, ..TrainConfig::default() };
    let a = train(&cfg, &tc, &plain, &[], &target(), |_| {}).unwrap();
    let b = train(&cfg, &tc, &turned, &[], &target(), |_| {}).unwrap();
    for (x, y) in a.metrics.iter().zip(&b.metrics) {
        assert!((x.train_loss - y.train_loss).abs() <= 1e-6);
    }
}

#[test]
fn report_names_first_and_largest_violation() {
    let stage = |name: &str, max_rel| StageDeviation { stage: name.into(), max_rel };
    let report = EquivarianceReport {
        trials: 1,
        tol: 1e-4,
        stages: vec![stage("a", 1e-9), stage("b", 1e-3), stage("c", 0.5)],
    };
    assert_eq!(report.first_violation().unwrap().stage, "b");
    assert!(report.render().ends_with("FAIL: stage b deviates by 1.000e-3 > tol 1.0e-4; largest deviation 5.000e-1 at c\n"));
    let with_nan = EquivarianceReport { stages: vec![stage("a", 1e-9), stage("b", f64::NAN), stage("c", 0.5)], ..report };
    assert_eq!(with_nan.worst_stage().unwrap().stage, "b");
    assert!(with_nan.worst().is_nan());
    assert!(!with_nan.passed());
}
