use std::collections::BTreeMap;

use rand::seq::SliceRandom;
use rand_distr::{Distribution, Gamma};
use serde::Serialize;

use crate::error::{Error, Result};
use crate::graph::DatasetBundle;
use crate::rng::{derive_seed, rng, Rng};

const RETRIES: usize = 100;

/// One client's graphs split into training, validation (20%) and test (10%).
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct ClientSplit {
    pub train: Vec<usize>,
    pub validation: Vec<usize>,
    pub test: Vec<usize>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct Partition {
    /// Sorted graph indices held by each client.
    pub assignment: Vec<Vec<usize>>,
    pub splits: Vec<ClientSplit>,
}

impl Partition {
    pub fn num_clients(&self) -> usize {
        self.assignment.len()
    }
}

fn dirichlet(alpha: f64, n: usize, r: &mut Rng) -> Vec<f64> {
    let gamma = Gamma::new(alpha, 1.0).expect("alpha validated positive");
    loop {
        let draws: Vec<f64> = (0..n).map(|_| gamma.sample(r)).collect();
        let total: f64 = draws.iter().sum();
        // tiny alpha can underflow every draw
        if total > 0.0 && total.is_finite() {
            return draws.into_iter().map(|d| d / total).collect();
        }
    }
}

fn deal(classes: &BTreeMap<i64, Vec<usize>>, n: usize, alpha: f64, r: &mut Rng) -> Vec<Vec<usize>> {
    let mut out = vec![Vec::new(); n];
    for members in classes.values() {
        let mut members = members.clone();
        members.shuffle(r);
        let props = dirichlet(alpha, n, r);
        let mut cum = 0.0;
        let mut start = 0;
        for (c, p) in props.iter().enumerate() {
            cum += p;
            let end = if c + 1 == n {
                members.len()
            } else {
                ((cum * members.len() as f64).round() as usize).clamp(start, members.len())
            };
            out[c].extend_from_slice(&members[start..end]);
            start = end;
        }
    }
    out
}

/// Moves one graph at a time from the largest client to each empty one.
fn patch_empty(assignment: &mut [Vec<usize>]) {
    while let Some(empty) = assignment.iter().position(Vec::is_empty) {
        let donor = (0..assignment.len()).max_by_key(|&c| (assignment[c].len(), usize::MAX - c)).unwrap();
        let g = assignment[donor].pop().unwrap();
        assignment[empty].push(g);
    }
}

fn split(graphs: &[usize], r: &mut Rng) -> ClientSplit {
    let mut order = graphs.to_vec();
    order.shuffle(r);
    let n = order.len();
    let (nv, nt) = (n * 2 / 10, n / 10);
    let mut validation = order[..nv].to_vec();
    let mut test = order[nv..nv + nt].to_vec();
    let mut train = order[nv + nt..].to_vec();
    validation.sort_unstable();
    test.sort_unstable();
    train.sort_unstable();
    ClientSplit {
        train,
        validation,
        test,
    }
}

/// Non-IID split: for each graph label, client shares are drawn from
/// `Dirichlet(alpha·1)` and that label's graphs are dealt accordingly.
/// Draws leaving a client empty are repeated up to a retry cap, after which
/// empty clients receive graphs from the largest one.
pub fn dirichlet_partition(bundle: &DatasetBundle, n_clients: usize, alpha: f64, seed: u64) -> Result<Partition> {
    if n_clients == 0 {
        return Err(Error::Parameter("at least one client is needed".into()));
    }
    if !(alpha > 0.0) || !alpha.is_finite() {
        return Err(Error::Parameter(format!("dirichlet alpha {alpha} must be positive")));
    }
    if bundle.len() < n_clients {
        return Err(Error::Partition(format!(
            "{} graphs cannot cover {n_clients} clients",
            bundle.len()
        )));
    }
    let labels = bundle.graph_labels()?;
    let mut classes: BTreeMap<i64, Vec<usize>> = BTreeMap::new();
    for (i, &l) in labels.iter().enumerate() {
        classes.entry(l).or_default().push(i);
    }
    let mut r = rng(derive_seed(seed, &[0]));
    let mut assignment = deal(&classes, n_clients, alpha, &mut r);
    for _ in 0..RETRIES {
        if assignment.iter().all(|a| !a.is_empty()) {
            break;
        }
        assignment = deal(&classes, n_clients, alpha, &mut r);
    }
    patch_empty(&mut assignment);
    for a in &mut assignment {
        a.sort_unstable();
    }
    let splits = assignment
        .iter()
        .enumerate()
        .map(|(c, a)| split(a, &mut rng(derive_seed(seed, &[1, c as u64]))))
        .collect();
    Ok(Partition { assignment, splits })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::graph::Graph;

    fn bundle(labels: &[i64]) -> DatasetBundle {
        let graphs = labels
            .iter()
            .map(|&l| Graph::new(2, [(0, 1)]).unwrap().with_graph_label(l))
            .collect();
        DatasetBundle::new("t", graphs)
    }

    #[test]
    fn single_client_gets_everything() {
        let b = bundle(&[1, -1, 1, 1, -1]);
        let p = dirichlet_partition(&b, 1, 0.5, 3).unwrap();
        assert_eq!(p.assignment, vec![vec![0, 1, 2, 3, 4]]);
    }

    #[test]
    fn covers_disjointly_and_never_empty() {
        let labels: Vec<i64> = (0..50).map(|i| (i % 3) as i64).collect();
        let b = bundle(&labels);
        for seed in 0..20 {
            let p = dirichlet_partition(&b, 7, 0.05, seed).unwrap();
            let mut all: Vec<usize> = p.assignment.concat();
            all.sort_unstable();
            assert_eq!(all, (0..50).collect::<Vec<_>>());
            assert!(p.assignment.iter().all(|a| !a.is_empty()));
            for (a, s) in p.assignment.iter().zip(&p.splits) {
                let mut parts = [s.train.clone(), s.validation.clone(), s.test.clone()].concat();
                parts.sort_unstable();
                assert_eq!(&parts, a);
                assert_eq!(s.validation.len(), a.len() * 2 / 10);
            }
        }
    }

    #[test]
    fn too_few_graphs() {
        assert!(matches!(
            dirichlet_partition(&bundle(&[1, 1]), 3, 1.0, 0),
            Err(Error::Partition(_))
        ));
    }

    #[test]
    fn deterministic() {
        let labels: Vec<i64> = (0..30).map(|i| (i % 2) as i64).collect();
        let b = bundle(&labels);
        assert_eq!(
            dirichlet_partition(&b, 4, 0.3, 9).unwrap(),
            dirichlet_partition(&b, 4, 0.3, 9).unwrap()
        );
    }
}
