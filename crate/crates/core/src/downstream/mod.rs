//! Consumers of a pairwise GW matrix: clustering, classification, exact
//! edit distance, and the privacy-budget and neighbour studies.

pub mod classify;
pub mod cluster;
pub mod ged;
pub mod mds;
pub mod studies;

pub use classify::{
    cross_validate, default_c_grid, default_gamma_grid, gw_kernel, kernel_rows, knn_classify, stratified_split,
    svm_decision, svm_predict, svm_train, CvReport, Split, SplitOutcome, SvmConfig, SvmModel,
};
pub use cluster::{adjusted_rand_index, centroid_size, gw_kmeans, ClusterAssignment};
pub use ged::{ged_bruteforce, DEFAULT_GED_CAP};
pub use mds::classical_mds;
pub use studies::{epsilon_sweep, neighbor_sensitivity, Budget, NeighborMode, SensitivityReport, SweepRow};

use std::fmt::Write as _;

use ndarray::Array2;

/// Comma-separated rows with full `f64` round-trip precision.
pub fn matrix_csv(m: &Array2<f64>) -> String {
    let mut out = String::new();
    for row in m.rows() {
        let cells: Vec<String> = row.iter().map(|v| format!("{v:?}")).collect();
        let _ = writeln!(out, "{}", cells.join(","));
    }
    out
}

/// `epsilon,mean,std,pairs,unconverged` table.
pub fn sweep_csv(rows: &[SweepRow]) -> String {
    let mut out = String::from("epsilon,mean,std,pairs,unconverged\n");
    for r in rows {
        let _ = writeln!(out, "{},{:?},{:?},{},{}", r.budget, r.mean, r.std, r.pairs, r.unconverged);
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::array;

    #[test]
    fn csv_round_trips_values() {
        let text = matrix_csv(&array![[0.1, 1.0 / 3.0], [2.0, 0.0]]);
        let parsed: Vec<f64> = text.split([',', '\n']).filter(|s| !s.is_empty()).map(|s| s.parse().unwrap()).collect();
        assert_eq!(parsed, vec![0.1, 1.0 / 3.0, 2.0, 0.0]);
    }
}
