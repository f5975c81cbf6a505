use nalgebra::{DMatrix, SymmetricEigen};
use ndarray::Array2;

use crate::error::{Error, Result};

/// Classical multidimensional scaling of a distance matrix into `dims`
/// coordinates. Negative eigenvalues, which indefinite GW matrices produce,
/// contribute zero coordinates.
pub fn classical_mds(distances: &Array2<f64>, dims: usize) -> Result<Array2<f64>> {
    let n = distances.nrows();
    if !distances.is_square() || n == 0 {
        return Err(Error::Shape("MDS needs a nonempty square matrix".into()));
    }
    if distances.iter().any(|v| !v.is_finite()) {
        return Err(Error::Numeric("distance matrix has non-finite entries".into()));
    }
    let sq = DMatrix::from_fn(n, n, |i, j| {
        let d = 0.5 * (distances[[i, j]] + distances[[j, i]]);
        d * d
    });
    let row_means: Vec<f64> = (0..n).map(|i| sq.row(i).sum() / n as f64).collect();
    let grand = row_means.iter().sum::<f64>() / n as f64;
    let b = DMatrix::from_fn(n, n, |i, j| -0.5 * (sq[(i, j)] - row_means[i] - row_means[j] + grand));
    let eig = SymmetricEigen::new(b);
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &c| eig.eigenvalues[c].total_cmp(&eig.eigenvalues[a]));
    let mut out = Array2::zeros((n, dims));
    for (k, &e) in order.iter().take(dims).enumerate() {
        let scale = eig.eigenvalues[e].max(0.0).sqrt();
        let v = eig.eigenvectors.column(e);
        // fix the sign so the largest-magnitude entry is positive
        let pivot = (0..n).fold(0, |p, i| if v[i].abs() > v[p].abs() { i } else { p });
        let sign = if v[pivot] < 0.0 { -1.0 } else { 1.0 };
        for i in 0..n {
            out[[i, k]] = sign * v[i] * scale;
        }
    }
    Ok(out)
}
