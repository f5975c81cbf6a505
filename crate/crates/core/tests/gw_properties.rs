use fedgw::graph::{apsp, synthetic, MetricMeasureSpace};
use fedgw::ot::{
    exact_transport, gw_objective, gw_objective_direct, gw_solve, kb_value, sinkhorn, tensor_gradient, Coupling,
    InnerSolver, Loss, SolverConfig,
};
use ndarray::{Array1, Array2};
use proptest::prelude::*;
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn random_space(n: usize, rng: &mut ChaCha8Rng, uniform: bool) -> MetricMeasureSpace {
    let pts: Vec<(f64, f64)> = (0..n).map(|_| (rng.random::<f64>(), rng.random::<f64>())).collect();
    let cost = Array2::from_shape_fn((n, n), |(i, j)| {
        let (a, b) = (pts[i.min(j)], pts[i.max(j)]);
        ((a.0 - b.0).powi(2) + (a.1 - b.1).powi(2)).sqrt()
    });
    let measure = if uniform {
        Array1::from_elem(n, 1.0 / n as f64)
    } else {
        let w: Array1<f64> = (0..n).map(|_| 0.2 + rng.random::<f64>()).collect();
        let s = w.sum();
        w / s
    };
    MetricMeasureSpace::new(cost, measure).unwrap()
}

/// A feasible plan that is not a vertex: mix the product measure with the
/// exact solution of a random linear cost.
fn random_coupling(p: &Array1<f64>, q: &Array1<f64>, rng: &mut ChaCha8Rng) -> Array2<f64> {
    let cost = Array2::from_shape_fn((p.len(), q.len()), |_| rng.random::<f64>());
    let vertex = exact_transport(&cost, p, q).unwrap();
    let lambda = rng.random::<f64>();
    let product = Array2::from_shape_fn((p.len(), q.len()), |(i, j)| p[i] * q[j]);
    vertex * lambda + product * (1.0 - lambda)
}

/// Minimum transport cost over all basic feasible solutions, found by
/// enumerating every set of `n + m - 1` cells and peeling the tree it forms.
fn vertex_enumeration(cost: &Array2<f64>, p: &Array1<f64>, q: &Array1<f64>) -> f64 {
    let (n, m) = cost.dim();
    let cells: Vec<(usize, usize)> = (0..n).flat_map(|i| (0..m).map(move |j| (i, j))).collect();
    let k = n + m - 1;
    let mut best = f64::INFINITY;
    let mut choice: Vec<usize> = (0..k).collect();
    loop {
        if let Some(plan) = peel(&choice.iter().map(|&c| cells[c]).collect::<Vec<_>>(), p, q) {
            best = best.min((cost * &plan).sum());
        }
        // next combination
        let mut i = k;
        loop {
            if i == 0 {
                return best;
            }
            i -= 1;
            if choice[i] != i + cells.len() - k {
                break;
            }
            if i == 0 {
                return best;
            }
        }
        choice[i] += 1;
        for j in i + 1..k {
            choice[j] = choice[j - 1] + 1;
        }
    }
}

fn peel(cells: &[(usize, usize)], p: &Array1<f64>, q: &Array1<f64>) -> Option<Array2<f64>> {
    let (n, m) = (p.len(), q.len());
    let mut supply = p.to_vec();
    let mut demand = q.to_vec();
    let mut alive = vec![true; cells.len()];
    let mut plan = Array2::zeros((n, m));
    for _ in 0..cells.len() {
        let mut row_deg = vec![0; n];
        let mut col_deg = vec![0; m];
        for (c, &(i, j)) in cells.iter().enumerate() {
            if alive[c] {
                row_deg[i] += 1;
                col_deg[j] += 1;
            }
        }
        let leaf = cells.iter().enumerate().find(|&(c, &(i, j))| alive[c] && (row_deg[i] == 1 || col_deg[j] == 1));
        let (c, &(i, j)) = leaf?;
        let x = if row_deg[i] == 1 { supply[i] } else { demand[j] };
        if x < -1e-12 {
            return None;
        }
        plan[[i, j]] = x;
        supply[i] -= x;
        demand[j] -= x;
        alive[c] = false;
    }
    if supply.iter().chain(&demand).any(|r| r.abs() > 1e-9) {
        return None;
    }
    Some(plan)
}

#[test]
fn exact_transport_matches_vertex_enumeration() {
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    for trial in 0..60 {
        let n = 1 + trial % 4;
        let m = 1 + (trial / 4) % 4;
        let p = random_space(n, &mut rng, trial % 2 == 0).measure().clone();
        let q = random_space(m, &mut rng, trial % 3 == 0).measure().clone();
        let cost = Array2::from_shape_fn((n, m), |_| (rng.random::<f64>() * 4.0).floor());
        let plan = exact_transport(&cost, &p, &q).unwrap();
        let oracle = vertex_enumeration(&cost, &p, &q);
        assert!(((&cost * &plan).sum() - oracle).abs() < 1e-12, "trial {trial}");
        assert!(Coupling::new(plan, p, q).is_ok());
    }
}

#[test]
fn sinkhorn_two_by_two_concentrates() {
    let cost = ndarray::array![[0.0, 1.0], [1.0, 0.0]];
    let w = ndarray::array![0.5, 0.5];
    let out = sinkhorn(&cost, &w, &w, 0.01, 1000, 1e-12).unwrap();
    assert!(out.coupling[[0, 1]] <= 0.05);
    let one = sinkhorn(&ndarray::array![[3.0]], &ndarray::array![1.0], &ndarray::array![1.0], 1.0, 5, 1e-12).unwrap();
    assert_eq!(one.coupling, ndarray::array![[1.0]]);
}

#[test]
fn factorized_matches_direct_sum() {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    for n in 1..=6 {
        for m in 1..=6 {
            let c = random_space(n, &mut rng, false);
            let d = random_space(m, &mut rng, false);
            let t = random_coupling(c.measure(), d.measure(), &mut rng);
            let coupling = Coupling::new(t.clone(), c.measure().clone(), d.measure().clone()).unwrap();
            let fact = gw_objective(&c, &d, &coupling, Loss::SquaredEuclidean).unwrap();
            let direct = gw_objective_direct(c.cost(), d.cost(), &t, Loss::SquaredEuclidean);
            assert!((fact - direct).abs() <= 1e-9, "{n}x{m}: {fact} vs {direct}");
        }
    }
}

#[test]
fn koopmans_beckmann_agrees_on_uniform_measures() {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    for _ in 0..20 {
        let c = random_space(rng.random_range(1..7), &mut rng, true);
        let d = random_space(rng.random_range(1..7), &mut rng, true);
        let t = random_coupling(c.measure(), d.measure(), &mut rng);
        let coupling = Coupling::new(t, c.measure().clone(), d.measure().clone()).unwrap();
        let a = gw_objective(&c, &d, &coupling, Loss::SquaredEuclidean).unwrap();
        let b = kb_value(&c, &d, &coupling).unwrap();
        assert!((a - b).abs() <= 1e-9);
    }
}

#[test]
fn gradient_matches_finite_differences() {
    let mut rng = ChaCha8Rng::seed_from_u64(8);
    for _ in 0..20 {
        let c = random_space(rng.random_range(1..6), &mut rng, false);
        let d = random_space(rng.random_range(1..6), &mut rng, false);
        let t = random_coupling(c.measure(), d.measure(), &mut rng);
        let coupling = Coupling::new(t.clone(), c.measure().clone(), d.measure().clone()).unwrap();
        let g = tensor_gradient(&c, &d, &coupling, Loss::SquaredEuclidean).unwrap();
        let h = 1e-6;
        let scale = g.iter().fold(1.0f64, |a, v| a.max(v.abs()));
        for ((i, j), &analytic) in g.indexed_iter() {
            let f = |delta: f64| {
                let mut x = t.clone();
                x[[i, j]] += delta;
                gw_objective_direct(c.cost(), d.cost(), &x, Loss::SquaredEuclidean)
            };
            let numeric = (f(h) - f(-h)) / (2.0 * h);
            assert!((analytic - numeric).abs() / scale <= 1e-5, "{analytic} vs {numeric}");
        }
    }
}

#[test]
fn one_by_one_gradient() {
    let c = MetricMeasureSpace::uniform(ndarray::array![[0.0]]).unwrap();
    let t = Coupling::product(c.measure(), c.measure());
    let g = tensor_gradient(&c, &c, &t, Loss::SquaredEuclidean).unwrap();
    assert_eq!(g, ndarray::array![[0.0]]);
}

fn small_graph_spaces() -> Vec<MetricMeasureSpace> {
    let mut out = vec![
        apsp(&synthetic::path(4)),
        apsp(&synthetic::cycle(5)),
        apsp(&synthetic::star(4)),
    ];
    for seed in 0..6 {
        out.push(apsp(&synthetic::erdos_renyi(4 + seed as usize % 4, 0.4, seed)));
    }
    out
}

#[test]
fn self_distance_vanishes_up_to_ten_nodes() {
    let mut rng = ChaCha8Rng::seed_from_u64(21);
    let mut spaces = small_graph_spaces();
    for n in 1..=10 {
        spaces.push(random_space(n, &mut rng, n % 2 == 0));
    }
    for s in &spaces {
        let r = gw_solve(s, s, &SolverConfig::default()).unwrap();
        assert!(r.value <= 1e-6, "size {}: {}", s.size(), r.value);
    }
}

#[test]
fn permuted_copy_is_at_distance_zero() {
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    for s in small_graph_spaces() {
        let mut perm: Vec<usize> = (0..s.size()).collect();
        perm.shuffle(&mut rng);
        let r = gw_solve(&s, &s.permuted(&perm), &SolverConfig::default()).unwrap();
        assert!(r.value <= 1e-6, "{}", r.value);
    }
}

#[test]
fn symmetric_in_its_arguments() {
    let spaces = small_graph_spaces();
    let cfg = SolverConfig::default();
    for a in &spaces {
        for b in &spaces {
            let ab = gw_solve(a, b, &cfg).unwrap();
            let ba = gw_solve(b, a, &cfg).unwrap();
            assert!((ab.value - ba.value).abs() <= 1e-6, "{} vs {}", ab.value, ba.value);
        }
    }
}

/// Generic costs (no ties) so that the result cannot depend on how the
/// linear oracle breaks ties between equally good vertices.
#[test]
fn permutation_invariant_on_generic_instances() {
    let mut rng = ChaCha8Rng::seed_from_u64(9);
    let cfg = SolverConfig::default();
    for trial in 0..40 {
        let a = random_space(2 + trial % 6, &mut rng, trial % 2 == 0);
        let b = random_space(2 + (trial / 6) % 6, &mut rng, trial % 3 == 0);
        let ab = gw_solve(&a, &b, &cfg).unwrap();
        let mut perm: Vec<usize> = (0..a.size()).collect();
        perm.shuffle(&mut rng);
        let pb = gw_solve(&a.permuted(&perm), &b, &cfg).unwrap();
        assert!((ab.value - pb.value).abs() <= 1e-6, "trial {trial}: {} vs {}", ab.value, pb.value);
    }
}

#[test]
fn sinkhorn_oracle_solver_is_feasible_and_monotone() {
    let spaces = small_graph_spaces();
    let cfg = SolverConfig {
        inner: InnerSolver::Sinkhorn,
        exhaustive_anchor_limit: 0,
        ..SolverConfig::default()
    };
    let ppa = SolverConfig {
        exhaustive_anchor_limit: 0,
        ..SolverConfig::proximal()
    };
    for a in &spaces {
        for b in &spaces {
            for c in [cfg.clone(), ppa.clone()] {
                let r = gw_solve(a, b, &c).unwrap();
                assert!(r.coupling.residual() <= 1e-8);
                assert!(r.coupling.plan().iter().all(|&v| v >= 0.0));
                assert!(r.history.windows(2).all(|w| w[1] <= w[0] + 1e-12));
            }
        }
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn solver_output_is_a_coupling_with_consistent_value(seed in 0u64..10_000, n in 1usize..7, m in 1usize..7) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let c = random_space(n, &mut rng, seed % 2 == 0);
        let d = random_space(m, &mut rng, seed % 3 == 0);
        let r = gw_solve(&c, &d, &SolverConfig::default()).unwrap();
        prop_assert!(r.coupling.residual() <= 1e-8);
        prop_assert!(r.coupling.plan().iter().all(|&v| v >= 0.0));
        let v = gw_objective(&c, &d, &r.coupling, Loss::SquaredEuclidean).unwrap();
        prop_assert!((v - r.value).abs() <= 1e-10);
        prop_assert!(r.history.windows(2).all(|w| w[1] <= w[0] + 1e-12));
        prop_assert!(r.value <= r.history[0] + 1e-12);
    }
}
