use ndarray::Array2;

use super::solver::gw_solve;
use super::SolverConfig;
use crate::error::{Error, Result};
use crate::graph::{uniform_measure, MetricMeasureSpace};

/// Resamples a space to `size` points by the index map `i ↦ ⌊i·n/size⌋`,
/// with the uniform measure.
pub fn resample_cost(space: &MetricMeasureSpace, size: usize) -> Result<MetricMeasureSpace> {
    if size == 0 {
        return Err(Error::Parameter("barycenter size must be at least 1".into()));
    }
    let n = space.size();
    let index = |i: usize| i * n / size;
    let cost = Array2::from_shape_fn((size, size), |(i, j)| {
        if i == j {
            0.0
        } else {
            space.cost()[[index(i), index(j)]]
        }
    });
    MetricMeasureSpace::uniform(cost)
}

fn check_weights(spaces: &[MetricMeasureSpace], weights: &[f64]) -> Result<()> {
    if spaces.is_empty() {
        return Err(Error::Precondition("barycenter of an empty set".into()));
    }
    if weights.len() != spaces.len() {
        return Err(Error::Shape(format!("{} weights for {} spaces", weights.len(), spaces.len())));
    }
    if weights.iter().any(|&w| !(w >= 0.0)) || (weights.iter().sum::<f64>() - 1.0).abs() > 1e-9 {
        return Err(Error::Domain("barycenter weights must lie on the simplex".into()));
    }
    Ok(())
}

/// GW barycenter of `size` points with uniform measure, started from the
/// heaviest member resampled to `size`.
pub fn gw_barycenter(
    spaces: &[MetricMeasureSpace],
    weights: &[f64],
    size: usize,
    cfg: &SolverConfig,
) -> Result<MetricMeasureSpace> {
    check_weights(spaces, weights)?;
    let heaviest = (0..spaces.len()).fold(0, |best, k| if weights[k] > weights[best] { k } else { best });
    let init = resample_cost(&spaces[heaviest], size)?;
    gw_barycenter_from(spaces, weights, init, cfg)
}

/// Block-coordinate descent from `init`: couple the current barycenter to
/// every member, then apply the squared-loss closed-form update
/// `C̄ = Σ_k w_k T_k C_k T_kᵀ / (p̄ p̄ᵀ)`. The update is symmetrized and its
/// diagonal set to zero. Stops when no entry moves by more than
/// `cfg.outer_tol`, when the weighted GW objective stops decreasing, or
/// after `cfg.max_outer_iters` sweeps, and returns the best iterate seen.
pub fn gw_barycenter_from(
    spaces: &[MetricMeasureSpace],
    weights: &[f64],
    init: MetricMeasureSpace,
    cfg: &SolverConfig,
) -> Result<MetricMeasureSpace> {
    check_weights(spaces, weights)?;
    cfg.validate()?;
    let size = init.size();
    let p = uniform_measure(size);
    let mut current = MetricMeasureSpace::uniform(init.cost().clone())?;
    let mut best: Option<(f64, MetricMeasureSpace)> = None;
    for _ in 0..cfg.max_outer_iters {
        let mut next = Array2::<f64>::zeros((size, size));
        let mut objective = 0.0;
        for (space, &w) in spaces.iter().zip(weights) {
            if w == 0.0 {
                continue;
            }
            let r = gw_solve(&current, space, cfg)?;
            objective += w * r.value;
            let t = r.coupling.plan();
            next = next + t.dot(space.cost()).dot(&t.t()) * w;
        }
        match best {
            Some((f, b)) if objective > f - cfg.outer_tol * f.abs().max(1.0) => {
                return Ok(if objective < f { current } else { b });
            }
            _ => best = Some((objective, current.clone())),
        }
        let mut cost = Array2::from_shape_fn((size, size), |(i, j)| {
            if i == j {
                0.0
            } else {
                0.5 * (next[[i, j]] + next[[j, i]]) / (p[i] * p[j])
            }
        });
        cost.mapv_inplace(|v| v.max(0.0));
        let change = cost
            .iter()
            .zip(current.cost())
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max);
        current = MetricMeasureSpace::uniform(cost)?;
        if change <= cfg.outer_tol {
            break;
        }
    }
    // `current` may be one unevaluated update past the best iterate
    let value = |c: &MetricMeasureSpace| -> Result<f64> {
        spaces
            .iter()
            .zip(weights)
            .filter(|(_, &w)| w > 0.0)
            .map(|(s, &w)| Ok(w * gw_solve(c, s, cfg)?.value))
            .sum()
    };
    match best {
        Some((f, b)) if value(&current)? > f => Ok(b),
        _ => Ok(current),
    }
}
