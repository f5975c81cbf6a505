use ndarray::{Array1, Array2, Axis};

use super::marginal_residual;
use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq)]
pub struct SinkhornOutput {
    /// Plan after rounding onto the exact marginals.
    pub coupling: Array2<f64>,
    pub iterations: usize,
    /// Marginal residual before rounding.
    pub residual: f64,
    pub converged: bool,
}

fn log_sum_exp(values: impl Iterator<Item = f64> + Clone) -> f64 {
    let max = values.clone().fold(f64::NEG_INFINITY, f64::max);
    if max == f64::NEG_INFINITY {
        return max;
    }
    max + values.map(|v| (v - max).exp()).sum::<f64>().ln()
}

/// Log-domain Sinkhorn on an arbitrary log-kernel `K` (plan `∝ exp(f_i + K_ij + g_j)`).
pub(crate) fn sinkhorn_log_kernel(
    log_kernel: &Array2<f64>,
    p: &Array1<f64>,
    q: &Array1<f64>,
    iters: usize,
    tol: f64,
) -> Result<SinkhornOutput> {
    let (n, m) = log_kernel.dim();
    let log_p = p.mapv(f64::ln);
    let log_q = q.mapv(f64::ln);
    let mut f = Array1::<f64>::zeros(n);
    let mut g = Array1::<f64>::zeros(m);
    let plan_of = |f: &Array1<f64>, g: &Array1<f64>| {
        Array2::from_shape_fn((n, m), |(i, j)| (f[i] + log_kernel[[i, j]] + g[j]).exp())
    };
    let mut iterations = 0;
    while iterations < iters {
        iterations += 1;
        for i in 0..n {
            let row = log_kernel.row(i);
            f[i] = log_p[i] - log_sum_exp(row.iter().zip(g.iter()).map(|(k, gj)| k + gj));
        }
        for j in 0..m {
            let col = log_kernel.column(j);
            g[j] = log_q[j] - log_sum_exp(col.iter().zip(f.iter()).map(|(k, fi)| k + fi));
        }
        // columns are exact after the g update; only rows can be off
        if (iterations % 10 == 0 || iterations == iters)
            && marginal_residual(&plan_of(&f, &g), p, q) <= tol {
                break;
            }
    }
    let plan = plan_of(&f, &g);
    if plan.iter().any(|v| !v.is_finite()) {
        return Err(Error::Numeric("Sinkhorn produced a non-finite plan".into()));
    }
    let residual = marginal_residual(&plan, p, q);
    Ok(SinkhornOutput {
        coupling: round_to_marginals(&plan, p, q),
        iterations,
        residual,
        converged: residual <= tol,
    })
}

/// Entropic transport `argmin ⟨cost, T⟩ - reg·H(T)` between `p` and `q`.
pub fn sinkhorn(
    cost: &Array2<f64>,
    p: &Array1<f64>,
    q: &Array1<f64>,
    reg: f64,
    iters: usize,
    tol: f64,
) -> Result<SinkhornOutput> {
    if cost.dim() != (p.len(), q.len()) {
        return Err(Error::Shape(format!(
            "cost {:?} with marginals of length {} and {}",
            cost.dim(),
            p.len(),
            q.len()
        )));
    }
    if !(reg > 0.0) || iters == 0 {
        return Err(Error::Parameter("Sinkhorn needs reg > 0 and at least one iteration".into()));
    }
    if p.iter().chain(q.iter()).any(|&w| !(w > 0.0)) {
        return Err(Error::Domain("Sinkhorn marginals must be strictly positive".into()));
    }
    sinkhorn_log_kernel(&cost.mapv(|c| -c / reg), p, q, iters, tol)
}

/// Projects a nonnegative plan onto the coupling polytope of `(p, q)`:
/// rows and columns are scaled down to their targets, then the remaining
/// deficit is filled by a rank-one correction.
pub fn round_to_marginals(plan: &Array2<f64>, p: &Array1<f64>, q: &Array1<f64>) -> Array2<f64> {
    let mut x = plan.mapv(|v| v.max(0.0));
    let rows = x.sum_axis(Axis(1));
    for (i, mut row) in x.axis_iter_mut(Axis(0)).enumerate() {
        if rows[i] > p[i] {
            row *= p[i] / rows[i];
        }
    }
    let cols = x.sum_axis(Axis(0));
    for (j, mut col) in x.axis_iter_mut(Axis(1)).enumerate() {
        if cols[j] > q[j] {
            col *= q[j] / cols[j];
        }
    }
    let err_r = p - &x.sum_axis(Axis(1));
    let err_c = q - &x.sum_axis(Axis(0));
    let mass = err_r.sum();
    if mass > 0.0 {
        for ((i, j), v) in x.indexed_iter_mut() {
            *v += err_r[i].max(0.0) * err_c[j].max(0.0) / mass;
        }
    }
    x
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::array;

    #[test]
    fn zero_cost_gives_product() {
        let p = array![0.2, 0.8];
        let q = array![0.5, 0.25, 0.25];
        let out = sinkhorn(&Array2::zeros((2, 3)), &p, &q, 1.0, 100, 1e-12).unwrap();
        assert!(out.converged);
        for ((i, j), v) in out.coupling.indexed_iter() {
            assert!((v - p[i] * q[j]).abs() < 1e-12);
        }
    }

    #[test]
    fn small_reg_approaches_assignment() {
        let cost = array![[0.0, 1.0], [1.0, 0.0]];
        let w = array![0.5, 0.5];
        let out = sinkhorn(&cost, &w, &w, 1e-3, 1000, 1e-12).unwrap();
        assert!(out.coupling[[0, 1]] < 1e-12);
        assert!((out.coupling[[0, 0]] - 0.5).abs() < 1e-12);
    }

    #[test]
    fn rounding_hits_marginals() {
        let p = array![0.3, 0.7];
        let q = array![0.6, 0.4];
        let x = array![[0.5, 0.1], [0.05, 0.2]];
        let r = round_to_marginals(&x, &p, &q);
        assert!(marginal_residual(&r, &p, &q) < 1e-15);
        assert!(r.iter().all(|&v| v >= 0.0));
    }

    #[test]
    fn rejects_bad_parameters() {
        let w = array![1.0];
        assert!(sinkhorn(&array![[0.0]], &w, &w, 0.0, 10, 1e-9).is_err());
        assert!(sinkhorn(&array![[0.0]], &w, &array![0.0], 1.0, 10, 1e-9).is_err());
    }
}
