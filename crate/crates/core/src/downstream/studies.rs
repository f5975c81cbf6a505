use rand::Rng as _;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::gnn::{extract_embedding, ModelParams};
use crate::graph::{Graph, MetricMeasureSpace};
use crate::ldp::{default_epsilon, multibit_encode, optimal_m};
use crate::ot::{cost_from_embedding, gw_solve, pairwise_gw_matrix, Metric, SolverConfig};
use crate::rng::{derive_seed, rng};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum NeighborMode {
    /// Remove one edge.
    Edge,
    /// Remove one node with its incident edges.
    Node,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SensitivityReport {
    /// `GW(original, perturbed)` for each completed trial, in trial order.
    pub values: Vec<f64>,
    /// Trials whose perturbed graph could not be embedded.
    pub skipped: Vec<usize>,
}

/// Distance between a graph and random neighbours that differ by one edge
/// or one node. `embed` maps a graph to its metric-measure space.
pub fn neighbor_sensitivity<F>(
    g: &Graph,
    mode: NeighborMode,
    embed: F,
    cfg: &SolverConfig,
    trials: usize,
    seed: u64,
) -> Result<SensitivityReport>
where
    F: Fn(&Graph) -> Result<MetricMeasureSpace> + Sync,
{
    match mode {
        NeighborMode::Edge if g.edge_count() == 0 => {
            return Err(Error::Precondition("edge neighbours need at least one edge".into()))
        }
        NeighborMode::Node if g.node_count() < 2 => {
            return Err(Error::Precondition("node neighbours need at least two nodes".into()))
        }
        _ => {}
    }
    let base = embed(g)?;
    let outcomes = (0..trials)
        .into_par_iter()
        .map(|t| {
            let mut r = rng(derive_seed(seed, &[t as u64]));
            let perturbed = match mode {
                NeighborMode::Edge => {
                    let (u, v) = g.edges()[r.random_range(0..g.edge_count())];
                    g.without_edge(u, v)?
                }
                NeighborMode::Node => g.without_node(r.random_range(0..g.node_count()))?,
            };
            match embed(&perturbed) {
                Ok(space) => Ok(Some(gw_solve(&base, &space, cfg)?.value.max(0.0))),
                Err(Error::Precondition(_)) => Ok(None),
                Err(e) => Err(e),
            }
        })
        .collect::<Result<Vec<_>>>()?;
    let mut report = SensitivityReport {
        values: Vec::new(),
        skipped: Vec::new(),
    };
    for (t, o) in outcomes.into_iter().enumerate() {
        match o {
            Some(v) => report.values.push(v),
            None => report.skipped.push(t),
        }
    }
    Ok(report)
}

/// Privacy budget for one row of an ε sweep.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Budget {
    /// No encoding: distances between raw embeddings.
    Unencoded,
    /// `1 / |V|` per graph.
    PerGraphDefault,
    Fixed(f64),
}

impl Budget {
    pub fn label(&self) -> String {
        match *self {
            Budget::Unencoded => "0".into(),
            Budget::PerGraphDefault => "1/|V|".into(),
            Budget::Fixed(e) => format!("{e}"),
        }
    }

    fn epsilon(&self, g: &Graph) -> Option<f64> {
        match *self {
            Budget::Unencoded => None,
            Budget::PerGraphDefault => Some(default_epsilon(g)),
            Budget::Fixed(0.0) => None,
            Budget::Fixed(e) => Some(e),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SweepRow {
    pub budget: String,
    pub mean: f64,
    /// Population standard deviation over all pairwise values of all repeats.
    pub std: f64,
    pub pairs: usize,
    pub unconverged: usize,
}

fn mean_std(values: &[f64]) -> (f64, f64) {
    let n = values.len().max(1) as f64;
    let mean = values.iter().sum::<f64>() / n;
    let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / n;
    (mean, var.sqrt())
}

fn upper(m: &ndarray::Array2<f64>) -> Vec<f64> {
    let n = m.nrows();
    (0..n).flat_map(|i| (i + 1..n).map(move |j| m[[i, j]])).collect()
}

/// Mean and spread of pairwise GW between encoded embeddings for each
/// budget. Every solve starts from the same initial plan, so the budget is
/// the only thing that varies. The unencoded row does not depend on the
/// repeat and is computed once.
pub fn epsilon_sweep(
    graphs: &[Graph],
    params: &ModelParams,
    budgets: &[Budget],
    repeats: usize,
    cfg: &SolverConfig,
    metric: Metric,
    seed: u64,
) -> Result<Vec<SweepRow>> {
    if graphs.len() < 2 {
        return Err(Error::Precondition("a sweep needs at least two graphs".into()));
    }
    if repeats == 0 {
        return Err(Error::Parameter("repeats must be at least 1".into()));
    }
    let raw = graphs
        .iter()
        .map(|g| extract_embedding(g, params))
        .collect::<Result<Vec<_>>>()?;
    let mut rows = Vec::with_capacity(budgets.len());
    for (b, budget) in budgets.iter().enumerate() {
        let encoded = graphs.iter().any(|g| budget.epsilon(g).is_some());
        let runs = if encoded { repeats } else { 1 };
        let mut values = Vec::new();
        let mut unconverged = 0;
        for rep in 0..runs {
            let spaces = graphs
                .iter()
                .zip(&raw)
                .enumerate()
                .map(|(i, (g, h))| match budget.epsilon(g) {
                    None => cost_from_embedding(h, metric),
                    Some(eps) => {
                        let m = optimal_m(eps, h.values().ncols());
                        let s = derive_seed(seed, &[b as u64, rep as u64, i as u64]);
                        cost_from_embedding(&multibit_encode(h, eps, m, s)?, metric)
                    }
                })
                .collect::<Result<Vec<_>>>()?;
            let result = pairwise_gw_matrix(&spaces, cfg, None, 1.0)?;
            unconverged += result.unconverged_pairs().len();
            values.extend(upper(&result.matrix));
        }
        let (mean, std) = mean_std(&values);
        rows.push(SweepRow {
            budget: budget.label(),
            mean,
            std,
            pairs: values.len(),
            unconverged,
        });
    }
    Ok(rows)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::graph::{apsp, synthetic};
    use ndarray::Array2;

    fn apsp_embed(g: &Graph) -> Result<MetricMeasureSpace> {
        Ok(apsp(g))
    }

    #[test]
    fn path_end_removal_moves_the_space() {
        let g = synthetic::path(3);
        let r = neighbor_sensitivity(&g, NeighborMode::Node, apsp_embed, &SolverConfig::default(), 6, 1).unwrap();
        assert_eq!(r.values.len(), 6);
        assert!(r.values.iter().all(|&v| v > 0.0));
        let direct = gw_solve(&apsp(&g), &apsp(&synthetic::path(2)), &SolverConfig::default()).unwrap();
        assert!(direct.value > 0.0);
    }

    #[test]
    fn one_edge_one_trial() {
        let g = synthetic::path(2);
        let r = neighbor_sensitivity(&g, NeighborMode::Edge, apsp_embed, &SolverConfig::default(), 1, 0).unwrap();
        assert_eq!(r.values.len(), 1);
        assert!(neighbor_sensitivity(&Graph::new(2, []).unwrap(), NeighborMode::Edge, apsp_embed, &SolverConfig::default(), 1, 0)
            .is_err());
    }

    #[test]
    fn failed_embeddings_are_skipped() {
        let g = synthetic::star(3);
        let picky = |h: &Graph| {
            if h.node_count() < 4 {
                Err(Error::Precondition("too small".into()))
            } else {
                Ok(apsp(h))
            }
        };
        let r = neighbor_sensitivity(&g, NeighborMode::Node, picky, &SolverConfig::default(), 3, 0).unwrap();
        assert_eq!(r.skipped, vec![0, 1, 2]);
    }

    fn featured(g: Graph) -> Graph {
        let n = g.node_count();
        let x = Array2::from_shape_fn((n, 2), |(i, j)| ((i + j) % 3) as f64);
        g.with_features(x).unwrap()
    }

    #[test]
    fn unencoded_row_is_the_raw_baseline() {
        let graphs = vec![featured(synthetic::path(3)), featured(synthetic::cycle(4)), featured(synthetic::star(3))];
        let params = ModelParams::gcn(2, 3, 3, 0);
        let cfg = SolverConfig::default();
        let rows = epsilon_sweep(&graphs, &params, &[Budget::Unencoded, Budget::Fixed(0.0)], 4, &cfg, Metric::Euclidean, 2)
            .unwrap();
        let spaces: Vec<_> = graphs
            .iter()
            .map(|g| cost_from_embedding(&extract_embedding(g, &params).unwrap(), Metric::Euclidean).unwrap())
            .collect();
        let m = pairwise_gw_matrix(&spaces, &cfg, None, 1.0).unwrap().matrix;
        let (mean, std) = mean_std(&upper(&m));
        assert_eq!((rows[0].mean, rows[0].std), (mean, std));
        assert_eq!(rows[0], SweepRow { budget: "0".into(), ..rows[1].clone() });
        assert_eq!(rows[0].pairs, 3);
    }

    #[test]
    fn encoded_rows_pool_all_repeats() {
        let graphs = vec![featured(synthetic::path(3)), featured(synthetic::cycle(4))];
        let params = ModelParams::gcn(2, 3, 3, 0);
        let rows = epsilon_sweep(
            &graphs,
            &params,
            &[Budget::PerGraphDefault, Budget::Fixed(2.0)],
            5,
            &SolverConfig::default(),
            Metric::Euclidean,
            2,
        )
        .unwrap();
        assert_eq!(rows[0].budget, "1/|V|");
        assert!(rows.iter().all(|r| r.pairs == 5));
    }
}
