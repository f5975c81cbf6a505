use fedgw::gnn::{gradients, loss, train_local, Architecture, ModelParams, ModelSpec, TrainConfig};
use fedgw::graph::{synthetic, Graph};
use ndarray::Array2;
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn labeled(g: Graph, features: usize, classes: usize, r: &mut ChaCha8Rng) -> Graph {
    let n = g.node_count();
    let x = Array2::from_shape_fn((n, features), |_| r.random_range(-1.0..1.0));
    let labels = (0..n).map(|_| r.random_range(0..classes)).collect();
    g.with_features(x).unwrap().with_node_labels(labels).unwrap()
}

/// A model of the given shape with every parameter drawn from [-1, 1],
/// which keeps ReLU inputs away from 0 almost surely.
fn random_params(spec: ModelSpec, features: usize, classes: usize, r: &mut ChaCha8Rng) -> ModelParams {
    let shape = spec.build(features, classes, 0).unwrap();
    let drawn: Vec<f64> = shape.flatten().iter().map(|_| r.random_range(-1.0..1.0)).collect();
    shape.with_flat(&drawn).unwrap()
}

/// Largest |analytic − central difference|, relative to the largest analytic entry.
fn fd_error(g: &Graph, params: &ModelParams, step: f64) -> f64 {
    let (_, grads) = gradients(g, params).unwrap();
    let analytic = grads.flatten();
    let flat = params.flatten();
    let mut worst = 0.0f64;
    for k in 0..flat.len() {
        let at = |delta: f64| {
            let mut v = flat.clone();
            v[k] += delta;
            loss(g, &params.with_flat(&v).unwrap()).unwrap()
        };
        let numeric = (at(step) - at(-step)) / (2.0 * step);
        worst = worst.max((analytic[k] - numeric).abs());
    }
    worst / analytic.iter().fold(0.0f64, |m, a| m.max(a.abs())).max(1e-12)
}

fn spec(architecture: Architecture, hidden_dim: usize) -> ModelSpec {
    ModelSpec {
        architecture,
        hidden_dim,
        ..ModelSpec::default()
    }
}

#[test]
fn four_node_graph_matches_finite_differences() {
    for arch in [Architecture::Gcn, Architecture::Gin] {
        let mut r = ChaCha8Rng::seed_from_u64(4);
        let g = labeled(synthetic::cycle(4), 3, 2, &mut r);
        let params = random_params(spec(arch, 4), 3, 2, &mut r);
        let err = fd_error(&g, &params, 1e-5);
        assert!(err <= 1e-4, "{arch:?}: {err}");
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn random_instances_match_finite_differences(
        n in 2usize..=6, features in 1usize..4, classes in 2usize..4, hidden in 1usize..=4,
        gin: bool, seed: u64,
    ) {
        let mut r = ChaCha8Rng::seed_from_u64(seed);
        let g = labeled(synthetic::erdos_renyi(n, 0.5, seed), features, classes, &mut r);
        let arch = if gin { Architecture::Gin } else { Architecture::Gcn };
        let params = random_params(spec(arch, hidden), features, classes, &mut r);
        let err = fd_error(&g, &params, 1e-5);
        prop_assert!(err <= 1e-4, "{:?}: {}", arch, err);
    }
}

#[test]
fn training_fits_a_separable_labeling() {
    // node label = whether the first feature is positive
    let mut r = ChaCha8Rng::seed_from_u64(9);
    let g = synthetic::erdos_renyi(12, 0.2, 9);
    let x = Array2::from_shape_fn((12, 2), |_| r.random_range(-1.0..1.0));
    let labels = (0..12).map(|i| usize::from(x[[i, 0]] > 0.0)).collect();
    let g = g.with_features(x).unwrap().with_node_labels(labels).unwrap();
    let start = spec(Architecture::Gin, 8).build(2, 2, 1).unwrap();
    let trained = train_local(&g, &start, &TrainConfig::new(400, 0.1, 0).unwrap()).unwrap();
    assert!(loss(&g, &trained).unwrap() < 0.5 * loss(&g, &start).unwrap());
}
