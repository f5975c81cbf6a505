//! Synthetic graph generators for tests and offline experiments.

use ndarray::Array2;
use rand::distr::weighted::WeightedIndex;
use rand::distr::Distribution;
use rand::Rng as _;
use rand_distr::Pareto;

use super::Graph;
use crate::rng::rng;

pub fn path(n: usize) -> Graph {
    Graph::new(n, (1..n).map(|i| (i - 1, i))).unwrap()
}

pub fn cycle(n: usize) -> Graph {
    Graph::new(n, (0..n).map(|i| (i, (i + 1) % n)).filter(|(u, v)| u != v)).unwrap()
}

/// Star with `leaves` leaves around hub 0.
pub fn star(leaves: usize) -> Graph {
    Graph::new(leaves + 1, (1..=leaves).map(|i| (0, i))).unwrap()
}

pub fn complete(n: usize) -> Graph {
    Graph::new(n, (0..n).flat_map(|u| (u + 1..n).map(move |v| (u, v)))).unwrap()
}

/// G(n, p) random graph.
pub fn erdos_renyi(n: usize, p: f64, seed: u64) -> Graph {
    let mut r = rng(seed);
    let mut edges = Vec::new();
    for u in 0..n {
        for v in u + 1..n {
            if r.random::<f64>() < p {
                edges.push((u, v));
            }
        }
    }
    Graph::new(n, edges).unwrap()
}

/// Parameters of a labeled citation-style network.
#[derive(Debug, Clone)]
pub struct CitationConfig {
    pub nodes: usize,
    pub classes: usize,
    pub feature_dim: usize,
    pub mean_degree: f64,
    /// Probability that an edge joins two nodes of the same class.
    pub homophily: f64,
    /// Probability of a class-specific word being present (background words use a tenth of it).
    pub word_rate: f64,
    pub seed: u64,
}

impl Default for CitationConfig {
    fn default() -> Self {
        CitationConfig {
            nodes: 600,
            classes: 6,
            feature_dim: 60,
            mean_degree: 2.8,
            homophily: 0.75,
            word_rate: 0.3,
            seed: 0,
        }
    }
}

/// Degree-heterogeneous planted-partition graph with bag-of-words features.
///
/// Node weights follow a Pareto law so a few nodes act as hubs; each edge picks
/// its first endpoint by weight and its second endpoint by weight within the
/// same class with probability `homophily`, otherwise from another class.
pub fn citation_graph(cfg: &CitationConfig) -> Graph {
    let mut r = rng(cfg.seed);
    let n = cfg.nodes;
    let k = cfg.classes.max(1);
    let labels: Vec<usize> = (0..n).map(|i| i % k).collect();
    let pareto = Pareto::new(1.0, 2.5).unwrap();
    let weights: Vec<f64> = (0..n).map(|_| pareto.sample(&mut r)).collect();
    let all = WeightedIndex::new(&weights).unwrap();
    let per_class: Vec<(Vec<usize>, WeightedIndex<f64>)> = (0..k)
        .map(|c| {
            let members: Vec<usize> = (0..n).filter(|&i| labels[i] == c).collect();
            let w: Vec<f64> = members.iter().map(|&i| weights[i]).collect();
            (members, WeightedIndex::new(&w).unwrap())
        })
        .collect();
    let target = (cfg.mean_degree * n as f64 / 2.0).round() as usize;
    let mut edges = std::collections::BTreeSet::new();
    let mut attempts = 0;
    while edges.len() < target && attempts < target * 50 {
        attempts += 1;
        let u = all.sample(&mut r);
        let v = if r.random::<f64>() < cfg.homophily || k == 1 {
            let (m, d) = &per_class[labels[u]];
            m[d.sample(&mut r)]
        } else {
            loop {
                let v = all.sample(&mut r);
                if labels[v] != labels[u] {
                    break v;
                }
            }
        };
        if u != v {
            edges.insert((u.min(v), u.max(v)));
        }
    }
    let block = (cfg.feature_dim / k).max(1);
    let features = Array2::from_shape_fn((n, cfg.feature_dim), |(i, f)| {
        let own = f / block == labels[i];
        let rate = if own { cfg.word_rate } else { cfg.word_rate / 10.0 };
        f64::from(u8::from(r.random::<f64>() < rate))
    });
    Graph::new(n, edges)
        .unwrap()
        .with_features(features)
        .unwrap()
        .with_node_labels(labels)
        .unwrap()
}
