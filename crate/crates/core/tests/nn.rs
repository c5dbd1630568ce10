use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use wlrni::datagen::{generate_dataset, gen_exp_pair, GeneratorConfig};
use wlrni::graph::{NodeType, TypedGraph};
use wlrni::nn::{
    cross_validate, forward, loss_and_grad, sample_features, type_features, Activation, ModelConfig, ModelParams,
};

fn six_node_graph() -> TypedGraph {
    use NodeType::*;
    let types = vec![LiteralNode, LiteralNode, LiteralNode, LiteralNode, DisjunctionNode, DisjunctionNode];
    TypedGraph::new(types, [(0, 1), (2, 3), (0, 4), (2, 4), (1, 5), (3, 5), (2, 5)]).unwrap()
}

/// Gradients below this magnitude are compared on an absolute scale: with a
/// 1e-5 step, central differences cannot resolve them more finely than ~1e-9.
const GRAD_FLOOR: f64 = 1e-5;

fn loss_at(g: &TypedGraph, config: &ModelConfig, params: &ModelParams, feature_seed: u64, label: usize) -> f64 {
    let f = sample_features(g, config, params, &mut ChaCha8Rng::seed_from_u64(feature_seed)).unwrap();
    loss_and_grad(&[(g, &f, label)], params, config.activation).unwrap().0
}

#[test]
fn analytic_gradients_match_central_differences() {
    let g = six_node_graph();
    let h = 1e-5;
    for seed in 0..10u64 {
        let activation = if seed % 4 == 3 { Activation::Tanh } else { Activation::Elu };
        let config = ModelConfig { d: 8, layers: 3, rni_fraction: 0.5, activation, ..ModelConfig::default() };
        let params = ModelParams::init(&config, &mut ChaCha8Rng::seed_from_u64(100 + seed));
        let label = (seed % 2) as usize;
        let fseed = 1000 + seed;
        let f = sample_features(&g, &config, &params, &mut ChaCha8Rng::seed_from_u64(fseed)).unwrap();
        let (_, grads) = loss_and_grad(&[(&g, &f, label)], &params, activation).unwrap();

        let analytic: Vec<f64> = grads.tensors().concat();
        let mut probe = params.clone();
        let mut idx = 0;
        let mut worst: f64 = 0.0;
        let num_tensors = probe.tensors().len();
        for t in 0..num_tensors {
            let len = probe.tensors()[t].len();
            for i in 0..len {
                let orig = probe.tensors()[t][i];
                probe.tensors_mut()[t][i] = orig + h;
                let up = loss_at(&g, &config, &probe, fseed, label);
                probe.tensors_mut()[t][i] = orig - h;
                let down = loss_at(&g, &config, &probe, fseed, label);
                probe.tensors_mut()[t][i] = orig;
                let numeric = (up - down) / (2.0 * h);
                let a = analytic[idx];
                let rel = (a - numeric).abs() / a.abs().max(numeric.abs()).max(GRAD_FLOOR);
                assert!(rel < 1e-4, "seed {seed} tensor {t} index {i}: analytic {a} numeric {numeric} rel {rel}");
                worst = worst.max(rel);
                idx += 1;
            }
        }
        assert_eq!(idx, analytic.len());
        assert!(worst < 1e-4);
    }
}

#[test]
fn batch_loss_is_the_mean() {
    let g = six_node_graph();
    let config = ModelConfig { d: 8, layers: 2, ..ModelConfig::default() };
    let params = ModelParams::init(&config, &mut ChaCha8Rng::seed_from_u64(4));
    let f = type_features(&g, &params);
    let (l0, g0) = loss_and_grad(&[(&g, &f, 0)], &params, Activation::Elu).unwrap();
    let (l1, g1) = loss_and_grad(&[(&g, &f, 1)], &params, Activation::Elu).unwrap();
    let (lb, gb) = loss_and_grad(&[(&g, &f, 0), (&g, &f, 1)], &params, Activation::Elu).unwrap();
    assert!((lb - (l0 + l1) / 2.0).abs() < 1e-12);
    let want: Vec<f64> = g0.tensors().concat().iter().zip(g1.tensors().concat()).map(|(a, b)| (a + b) / 2.0).collect();
    for (a, b) in gb.tensors().concat().iter().zip(want) {
        assert!((a - b).abs() < 1e-12);
    }
}

#[test]
fn forward_is_permutation_invariant() {
    let mut rng = ChaCha8Rng::seed_from_u64(8);
    let pair = gen_exp_pair(3, 12, &mut rng).unwrap();
    let g = &pair.unsat_graph;
    for seed in 0..5u64 {
        let config = ModelConfig { d: 16, layers: 4, rni_fraction: 0.5, ..ModelConfig::default() };
        let params = ModelParams::init(&config, &mut ChaCha8Rng::seed_from_u64(seed));
        let mut perm: Vec<usize> = (0..g.num_nodes()).collect();
        perm.shuffle(&mut rng);
        let pg = g.permuted(&perm).unwrap();

        let det = type_features(g, &params);
        let a = forward(g, &det, &params, Activation::Elu).unwrap();
        let b = forward(&pg, &det.permute_rows(&perm), &params, Activation::Elu).unwrap();
        assert!((a[0] - b[0]).abs() < 1e-9 && (a[1] - b[1]).abs() < 1e-9, "{a:?} {b:?}");

        let rnd = sample_features(g, &config, &params, &mut rng).unwrap();
        let a = forward(g, &rnd, &params, Activation::Elu).unwrap();
        let b = forward(&pg, &rnd.permute_rows(&perm), &params, Activation::Elu).unwrap();
        assert!((a[0] - b[0]).abs() < 1e-9 && (a[1] - b[1]).abs() < 1e-9, "{a:?} {b:?}");
    }
}

#[test]
fn deterministic_features_cannot_separate_exp_pairs() {
    let mut rng = ChaCha8Rng::seed_from_u64(21);
    for n in 2..=4 {
        let pair = gen_exp_pair(n, 12, &mut rng).unwrap();
        for (seed, activation) in [(0, Activation::Elu), (1, Activation::Tanh), (2, Activation::Elu)] {
            let config = ModelConfig { activation, ..ModelConfig::default() };
            let params = ModelParams::init(&config, &mut ChaCha8Rng::seed_from_u64(seed));
            let ls = forward(&pair.sat_graph, &type_features(&pair.sat_graph, &params), &params, activation).unwrap();
            let lu = forward(&pair.unsat_graph, &type_features(&pair.unsat_graph, &params), &params, activation).unwrap();
            let gap = (ls[0] - lu[0]).abs().max((ls[1] - lu[1]).abs());
            assert!(gap < 1e-6, "n={n} seed={seed}: gap {gap}");
        }
    }
}

#[test]
fn random_features_agree_in_expectation_on_isomorphic_inputs() {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let g = six_node_graph();
    let mut perm: Vec<usize> = (0..6).collect();
    perm.shuffle(&mut rng);
    let pg = g.permuted(&perm).unwrap();
    let config = ModelConfig { d: 16, layers: 3, rni_fraction: 1.0, ..ModelConfig::default() };
    let params = ModelParams::init(&config, &mut ChaCha8Rng::seed_from_u64(9));
    let draws = 1000;
    let stats = |graph: &TypedGraph, rng: &mut ChaCha8Rng| -> [(f64, f64); 2] {
        let xs: Vec<[f64; 2]> = (0..draws)
            .map(|_| {
                let f = sample_features(graph, &config, &params, rng).unwrap();
                forward(graph, &f, &params, Activation::Elu).unwrap()
            })
            .collect();
        std::array::from_fn(|k| {
            let mean = xs.iter().map(|x| x[k]).sum::<f64>() / draws as f64;
            let var = xs.iter().map(|x| (x[k] - mean).powi(2)).sum::<f64>() / (draws - 1) as f64;
            (mean, (var / draws as f64).sqrt())
        })
    };
    let a = stats(&g, &mut rng);
    let b = stats(&pg, &mut rng);
    for k in 0..2 {
        let se = (a[k].1.powi(2) + b[k].1.powi(2)).sqrt();
        assert!((a[k].0 - b[k].0).abs() < 3.0 * se, "logit {k}: {:?} vs {:?}", a[k], b[k]);
    }
}

#[test]
fn smoke_run_loss_trends_down() {
    let data = generate_dataset(
        &GeneratorConfig { num_pairs: 12, corrupt_fraction: 0.5, seed: 3, ..GeneratorConfig::default() },
        1,
    )
    .unwrap();
    let config = ModelConfig {
        d: 16,
        layers: 3,
        rni_fraction: 0.5,
        lr: Some(1e-3),
        epochs: 50,
        folds: 4,
        fold_limit: Some(1),
        seed: 11,
        ..ModelConfig::default()
    };
    let record = cross_validate(&data, &config, 1).unwrap();
    let losses: Vec<f64> = record.folds[0].epochs.iter().map(|e| e.train_loss).collect();
    let first = losses[..10].iter().sum::<f64>() / 10.0;
    let last = losses[40..].iter().sum::<f64>() / 10.0;
    assert!(last < first, "first {first} last {last}");
    assert_eq!(record.per_epoch.len(), 50);
}

#[test]
fn training_is_reproducible_and_job_independent() {
    let data = generate_dataset(&GeneratorConfig { num_pairs: 8, seed: 5, ..GeneratorConfig::default() }, 1).unwrap();
    let config = ModelConfig { d: 8, layers: 2, rni_fraction: 1.0, epochs: 3, folds: 4, seed: 2, ..ModelConfig::default() };
    let a = cross_validate(&data, &config, 1).unwrap();
    let b = cross_validate(&data, &config, 3).unwrap();
    assert_eq!(a.folds, b.folds);
    let (mut ma, mut mb) = (Vec::new(), Vec::new());
    a.write_metrics(&mut ma, false).unwrap();
    b.write_metrics(&mut mb, false).unwrap();
    assert_eq!(ma, mb);
    assert_eq!(a.lr, 5e-4);
}

#[test]
fn pairs_never_straddle_splits() {
    let data = generate_dataset(&GeneratorConfig { num_pairs: 10, seed: 1, ..GeneratorConfig::default() }, 1).unwrap();
    let config = ModelConfig { d: 4, layers: 1, epochs: 1, folds: 3, ..ModelConfig::default() };
    let record = cross_validate(&data, &config, 1).unwrap();
    let tests: Vec<usize> = record.folds.iter().map(|f| f.test_pairs).collect();
    assert_eq!(tests.iter().sum::<usize>(), 10);
    assert!(record.folds.iter().all(|f| f.train_pairs + f.test_pairs == 10));
    let too_few = ModelConfig { folds: 11, ..config };
    assert!(cross_validate(&data, &too_few, 1).is_err());
}
