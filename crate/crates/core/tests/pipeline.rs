use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use se3kit::graph::{featurize, graphs_from_json, graphs_to_json, parse_xyz, synthetic_dataset, EdgeRule, MolGraph, SYNTHETIC_TARGET};
use se3kit::models::{load_params, predict, save_params, split_dataset, train, ModelConfig, ModelKind, SavedModel, TrainConfig};

fn dataset(count: usize, seed: u64) -> Vec<MolGraph> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    synthetic_dataset(&mut rng, count, 3, 6)
        .iter()
        .map(|m| featurize(m, EdgeRule::Full, &Default::default()).unwrap())
        .collect()
}

#[test]
fn graphs_survive_json() {
    let graphs = dataset(5, 1);
    let back = graphs_from_json(&graphs_to_json(&graphs).unwrap()).unwrap();
    assert_eq!(back, graphs);
}

#[test]
fn train_save_reload_predict() {
    let graphs = dataset(30, 2);
    let split = split_dataset(graphs.len(), 7);
    let pick = |idx: &[usize]| idx.iter().map(|&i| graphs[i].clone()).collect::<Vec<_>>();
    let (tr, va, te) = (pick(&split.train), pick(&split.val), pick(&split.test));
    assert_eq!((tr.len(), va.len(), te.len()), (24, 3, 3));

    let cfg = ModelConfig { model: ModelKind::Se3t, num_layers: 1, channels: 4, num_degrees: 2, heads: 2, ..Default::default() };
    let tc = TrainConfig { epochs: 4, batch_size: 8, learning_rate: 3e-3, seed: 7, ..Default::default() };
    let targets = [SYNTHETIC_TARGET.to_string()];
    let out = train(&cfg, &tc, &tr, &va, &targets, |_| {}).unwrap();
    let best = out.metrics.iter().map(|m| m.val_loss).fold(f64::INFINITY, f64::min);

    let saved = SavedModel::new(cfg, &out.stats, out.params);
    let dir = tempfile::tempdir().unwrap();
    let file = dir.path().join("model.json");
    save_params(&file, &saved).unwrap();
    let loaded = load_params(&file).unwrap();

    let preds = predict(&loaded, &va, 2).unwrap();
    let mae = preds.iter().zip(&va).map(|(p, g)| (p[0] - g.labels[SYNTHETIC_TARGET]).abs()).sum::<f64>() / va.len() as f64;
    assert!((mae - best).abs() <= 1e-12 * best.max(1.0), "{mae} vs {best}");
    assert_eq!(predict(&loaded, &te, 1).unwrap(), predict(&saved, &te, 3).unwrap());
}

#[test]
fn radius_graph_with_isolated_atom_still_predicts() {
    let mol = parse_xyz("3\n\nC 0 0 0\nO 0 0 1.2\nN 5 5 5").unwrap();
    let g = featurize(&mol, EdgeRule::Radius(2.0), &Default::default()).unwrap();
    assert_eq!(g.num_edges(), 2);
    let cfg = ModelConfig { model: ModelKind::Tfn, num_layers: 1, channels: 4, num_degrees: 2, ..Default::default() };
    let net = se3kit::models::Model::new(&cfg).unwrap();
    let out = net.predict_one(&net.init_params(0), &g).unwrap();
    assert!(out[0].is_finite());
}
