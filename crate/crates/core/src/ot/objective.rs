use ndarray::{Array2, Axis};

use super::{marginal_residual, Coupling, Loss, FEASIBILITY_TOL};
use crate::error::{Error, Result};
use crate::graph::MetricMeasureSpace;

fn check_marginals(c: &MetricMeasureSpace, d: &MetricMeasureSpace, t: &Coupling) -> Result<()> {
    if t.plan().dim() != (c.size(), d.size()) {
        return Err(Error::Shape(format!(
            "coupling {:?} between spaces of size {} and {}",
            t.plan().dim(),
            c.size(),
            d.size()
        )));
    }
    let residual = marginal_residual(t.plan(), c.measure(), d.measure());
    if residual > FEASIBILITY_TOL {
        return Err(Error::Precondition(format!(
            "coupling marginals differ from the space measures by {residual:e}"
        )));
    }
    Ok(())
}

/// Squared-loss quadratic form `Q(X) = rᵀ(C∘C)r + cᵀ(D∘D)c - 2⟨C X D, X⟩`
/// for any `X` (not only couplings), with `r = X1`, `c = Xᵀ1`.
pub(crate) fn sq_quadratic(c2: &Array2<f64>, d2: &Array2<f64>, c: &Array2<f64>, d: &Array2<f64>, x: &Array2<f64>) -> f64 {
    let r = x.sum_axis(Axis(1));
    let k = x.sum_axis(Axis(0));
    let cross = (c.dot(x).dot(d) * x).sum();
    r.dot(&c2.dot(&r)) + k.dot(&d2.dot(&k)) - 2.0 * cross
}

/// Gradient of [`sq_quadratic`] at `x`:
/// `2((C∘C) r 1ᵀ + 1 cᵀ (D∘D) - 2 C X D)`. Equals
/// `2(f1(C) p 1ᵀ + 1 qᵀ f2(D)ᵀ - 2 C T Dᵀ)` on couplings of `(p, q)`.
pub(crate) fn sq_gradient(c2: &Array2<f64>, d2: &Array2<f64>, c: &Array2<f64>, d: &Array2<f64>, x: &Array2<f64>) -> Array2<f64> {
    let r = c2.dot(&x.sum_axis(Axis(1)));
    let k = d2.dot(&x.sum_axis(Axis(0)));
    let mut g = c.dot(x).dot(d) * -2.0;
    for ((i, j), v) in g.indexed_iter_mut() {
        *v += r[i] + k[j];
    }
    g * 2.0
}

fn kl_loss(a: f64, b: f64) -> f64 {
    if a == 0.0 {
        b
    } else if b == 0.0 {
        f64::INFINITY
    } else {
        a * (a / b).ln() - a + b
    }
}

/// `Σ_ijkl ℓ(C_ik, D_jl) T_ij T_kl`; errors if `T` is not a coupling of the
/// two measures. The squared loss uses the factorized form.
pub fn gw_objective(c: &MetricMeasureSpace, d: &MetricMeasureSpace, t: &Coupling, loss: Loss) -> Result<f64> {
    check_marginals(c, d, t)?;
    Ok(match loss {
        Loss::SquaredEuclidean => {
            let (cm, dm) = (c.cost(), d.cost());
            sq_quadratic(&cm.mapv(|v| v * v), &dm.mapv(|v| v * v), cm, dm, t.plan())
        }
        Loss::Kl => direct_sum(c.cost(), d.cost(), t.plan(), kl_loss),
    })
}

fn direct_sum(c: &Array2<f64>, d: &Array2<f64>, t: &Array2<f64>, loss: impl Fn(f64, f64) -> f64) -> f64 {
    let (n, m) = t.dim();
    let mut total = 0.0;
    for i in 0..n {
        for j in 0..m {
            if t[[i, j]] == 0.0 {
                continue;
            }
            for k in 0..n {
                for l in 0..m {
                    let w = t[[i, j]] * t[[k, l]];
                    if w != 0.0 {
                        total += loss(c[[i, k]], d[[j, l]]) * w;
                    }
                }
            }
        }
    }
    total
}

/// The O(n²m²) quadruple sum, no marginal check. Reference for small instances.
pub fn gw_objective_direct(c: &Array2<f64>, d: &Array2<f64>, t: &Array2<f64>, loss: Loss) -> f64 {
    match loss {
        Loss::SquaredEuclidean => direct_sum(c, d, t, |a, b| (a - b) * (a - b)),
        Loss::Kl => direct_sum(c, d, t, kl_loss),
    }
}

/// Koopmans-Beckmann value `‖C‖²/n² + ‖D‖²/m² - 2 tr(C T D Tᵀ)`.
/// Only defined for uniform measures.
pub fn kb_value(c: &MetricMeasureSpace, d: &MetricMeasureSpace, t: &Coupling) -> Result<f64> {
    if !c.is_uniform() || !d.is_uniform() {
        return Err(Error::Precondition(
            "the Koopmans-Beckmann form assumes uniform measures".into(),
        ));
    }
    check_marginals(c, d, t)?;
    let (n, m) = (c.size() as f64, d.size() as f64);
    let cf = c.cost().mapv(|v| v * v).sum();
    let df = d.cost().mapv(|v| v * v).sum();
    let trace = c.cost().dot(t.plan()).dot(d.cost()).dot(&t.plan().t()).diag().sum();
    Ok(cf / (n * n) + df / (m * m) - 2.0 * trace)
}

/// Gradient of the squared-loss objective with respect to the plan.
pub fn tensor_gradient(c: &MetricMeasureSpace, d: &MetricMeasureSpace, t: &Coupling, loss: Loss) -> Result<Array2<f64>> {
    if loss != Loss::SquaredEuclidean {
        return Err(Error::Parameter("gradient is implemented for the squared loss only".into()));
    }
    check_marginals(c, d, t)?;
    let (cm, dm) = (c.cost(), d.cost());
    Ok(sq_gradient(&cm.mapv(|v| v * v), &dm.mapv(|v| v * v), cm, dm, t.plan()))
}
