use ndarray::Array2;
use rayon::prelude::*;
use serde::Serialize;

use super::cost::feature_cost;
use super::solver::{fgw_solve, gw_solve};
use super::SolverConfig;
use crate::error::{Error, Result};
use crate::graph::MetricMeasureSpace;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PairwiseResult {
    pub matrix: Array2<f64>,
    /// `converged[[i, j]]` for the solve behind entry `(i, j)`; true on the diagonal.
    pub converged: Array2<bool>,
}

impl PairwiseResult {
    pub fn all_converged(&self) -> bool {
        self.converged.iter().all(|&c| c)
    }

    /// Upper-triangle pairs `(i, j)` whose solve hit its budget.
    pub fn unconverged_pairs(&self) -> Vec<(usize, usize)> {
        let n = self.matrix.nrows();
        (0..n)
            .flat_map(|i| (i + 1..n).map(move |j| (i, j)))
            .filter(|&(i, j)| !self.converged[[i, j]])
            .collect()
    }
}

/// All pairwise GW values, or fused-GW values when node `features` are
/// given (feature cost = squared Euclidean between feature rows).
///
/// Each unordered pair is solved once, in parallel on the current rayon
/// pool; the matrix is symmetric with a zero diagonal.
pub fn pairwise_gw_matrix(
    spaces: &[MetricMeasureSpace],
    cfg: &SolverConfig,
    features: Option<&[Array2<f64>]>,
    trade_off: f64,
) -> Result<PairwiseResult> {
    let n = spaces.len();
    if n == 0 {
        return Err(Error::Precondition("no spaces to compare".into()));
    }
    if let Some(f) = features {
        if f.len() != n {
            return Err(Error::Shape(format!("{} feature matrices for {n} spaces", f.len())));
        }
        if let Some(k) = (0..n).find(|&k| f[k].nrows() != spaces[k].size()) {
            return Err(Error::Shape(format!("feature rows of space {k} do not match its size")));
        }
    }
    let pairs: Vec<(usize, usize)> = (0..n).flat_map(|i| (i + 1..n).map(move |j| (i, j))).collect();
    let solved: Vec<(f64, bool)> = pairs
        .par_iter()
        .map(|&(i, j)| {
            let r = match features {
                Some(f) => fgw_solve(&spaces[i], &spaces[j], &feature_cost(&f[i], &f[j])?, trade_off, cfg)?,
                None => gw_solve(&spaces[i], &spaces[j], cfg)?,
            };
            Ok((r.value, r.converged))
        })
        .collect::<Result<_>>()?;
    let mut matrix = Array2::zeros((n, n));
    let mut converged = Array2::from_elem((n, n), true);
    for (&(i, j), &(v, ok)) in pairs.iter().zip(&solved) {
        matrix[[i, j]] = v;
        matrix[[j, i]] = v;
        converged[[i, j]] = ok;
        converged[[j, i]] = ok;
    }
    Ok(PairwiseResult { matrix, converged })
}
