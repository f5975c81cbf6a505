use ndarray::{Array1, Array2};

use super::emd::exact_transport;
use super::objective::{sq_gradient, sq_quadratic};
use super::sinkhorn::{sinkhorn_log_kernel, SinkhornOutput};
use super::{Coupling, GwResult, Init, InnerSolver, Method, SolverConfig};
use crate::error::{Error, Result};
use crate::graph::MetricMeasureSpace;

/// `(1 - α)⟨M, T⟩ + α Q(T)` for fixed spaces; `M = None` is pure GW.
struct Fused<'a> {
    c: &'a Array2<f64>,
    d: &'a Array2<f64>,
    c2: Array2<f64>,
    d2: Array2<f64>,
    linear: Option<&'a Array2<f64>>,
    alpha: f64,
    p: &'a Array1<f64>,
    q: &'a Array1<f64>,
}

impl<'a> Fused<'a> {
    fn new(c: &'a MetricMeasureSpace, d: &'a MetricMeasureSpace, linear: Option<&'a Array2<f64>>, alpha: f64) -> Self {
        Fused {
            c: c.cost(),
            d: d.cost(),
            c2: c.cost().mapv(|v| v * v),
            d2: d.cost().mapv(|v| v * v),
            linear,
            alpha,
            p: c.measure(),
            q: d.measure(),
        }
    }

    fn quadratic(&self, x: &Array2<f64>) -> f64 {
        sq_quadratic(&self.c2, &self.d2, self.c, self.d, x)
    }

    fn value(&self, t: &Array2<f64>) -> f64 {
        let lin = self.linear.map_or(0.0, |m| (1.0 - self.alpha) * (m * t).sum());
        lin + self.alpha * self.quadratic(t)
    }

    fn gradient(&self, t: &Array2<f64>) -> Array2<f64> {
        let g = sq_gradient(&self.c2, &self.d2, self.c, self.d, t) * self.alpha;
        match self.linear {
            Some(m) => g + &(m * (1.0 - self.alpha)),
            None => g,
        }
    }

    /// Minimizer over `τ ∈ [0, 1]` of `f(t + τΔ)`, which is the quadratic
    /// `f(t) + τ b + τ² a`.
    fn line_search(&self, grad: &Array2<f64>, delta: &Array2<f64>) -> f64 {
        let b = (grad * delta).sum();
        let a = self.alpha * self.quadratic(delta);
        if a > 0.0 {
            (-b / (2.0 * a)).clamp(0.0, 1.0)
        } else if a + b < 0.0 {
            1.0
        } else {
            0.0
        }
    }
}

/// Mean absolute entry, used to make the entropic strength scale-free.
fn mean_abs(g: &Array2<f64>) -> f64 {
    let s = g.iter().map(|v| v.abs()).sum::<f64>() / g.len() as f64;
    if s > 0.0 && s.is_finite() {
        s
    } else {
        1.0
    }
}

fn entropic(log_kernel: Array2<f64>, f: &Fused, cfg: &SolverConfig) -> Result<Array2<f64>> {
    let SinkhornOutput { coupling, .. } = sinkhorn_log_kernel(&log_kernel, f.p, f.q, cfg.inner_iters, cfg.inner_tol)?;
    Ok(coupling)
}

/// Direction target for one outer step.
fn target(f: &Fused, t: &Array2<f64>, grad: &Array2<f64>, cfg: &SolverConfig) -> Result<Array2<f64>> {
    let reg = cfg.inner_reg * mean_abs(grad);
    match (cfg.method, cfg.inner) {
        (Method::ConditionalGradient, InnerSolver::Exact) => exact_transport(grad, f.p, f.q),
        (Method::ConditionalGradient, InnerSolver::Sinkhorn) => entropic(grad.mapv(|g| -g / reg), f, cfg),
        (Method::ProximalPoint, _) => {
            let kernel = Array2::from_shape_fn(t.dim(), |ij| -grad[ij] / reg + t[ij].ln());
            entropic(kernel, f, cfg)
        }
    }
}

fn initial_plan(f: &Fused, cfg: &SolverConfig) -> Result<Array2<f64>> {
    match &cfg.init {
        Init::ProductMeasure => Ok(super::outer(f.p, f.q)),
        Init::Provided(plan) => Ok(Coupling::new(plan.clone(), f.p.clone(), f.q.clone())?.plan().clone()),
    }
}

fn descend(f: &Fused, mut t: Array2<f64>, cfg: &SolverConfig) -> Result<GwResult> {
    let mut value = f.value(&t);
    let mut history = vec![value];
    let mut converged = false;
    let mut iterations = 0;
    while iterations < cfg.max_outer_iters {
        iterations += 1;
        let grad = f.gradient(&t);
        let delta = target(f, &t, &grad, cfg)? - &t;
        let tau = f.line_search(&grad, &delta);
        if tau == 0.0 {
            converged = true;
            break;
        }
        let next = &t + &(delta * tau);
        let next_value = f.value(&next);
        if !next_value.is_finite() {
            return Err(Error::Numeric("objective became non-finite".into()));
        }
        if next_value >= value {
            converged = true;
            break;
        }
        let decrease = (value - next_value) / value.abs().max(f64::MIN_POSITIVE);
        t = next;
        value = next_value;
        history.push(value);
        if decrease <= cfg.outer_tol {
            converged = true;
            break;
        }
    }
    t.mapv_inplace(|v| v.max(0.0));
    let value = f.value(&t);
    Ok(GwResult {
        value,
        coupling: Coupling::from_parts_unchecked(t, f.p.clone(), f.q.clone()),
        iterations,
        converged,
        history,
    })
}

/// Squared 2-Wasserstein distance between two weighted samples on the line.
fn quantile_w2(x: &[(f64, f64)], y: &[(f64, f64)]) -> f64 {
    let (mut i, mut j) = (0, 0);
    let (mut wx, mut wy) = (x[0].1, y[0].1);
    let mut total = 0.0;
    loop {
        let step = wx.min(wy);
        let gap = x[i].0 - y[j].0;
        total += step * gap * gap;
        wx -= step;
        wy -= step;
        if wx <= 1e-15 {
            i += 1;
            if i == x.len() {
                break;
            }
            wx += x[i].1;
        }
        if wy <= 1e-15 {
            j += 1;
            if j == y.len() {
                break;
            }
            wy += y[j].1;
        }
    }
    total
}

fn sorted_profiles(cost: &Array2<f64>, measure: &Array1<f64>) -> Vec<Vec<(f64, f64)>> {
    cost.rows()
        .into_iter()
        .map(|row| {
            let mut v: Vec<(f64, f64)> = row.iter().copied().zip(measure.iter().copied()).collect();
            v.sort_by(|a, b| a.0.total_cmp(&b.0));
            v
        })
        .collect()
}

/// `W_ij`: squared 2-Wasserstein distance between the distance distribution
/// seen from point `i` of the first space and from point `j` of the second.
/// It vanishes along any isometry.
fn profile_cost(f: &Fused) -> Array2<f64> {
    let (px, py) = (sorted_profiles(f.c, f.p), sorted_profiles(f.d, f.q));
    Array2::from_shape_fn((px.len(), py.len()), |(i, j)| quantile_w2(&px[i], &py[j]))
}

/// Exact matching under `cost`. The proximal method cannot leave zero
/// cells, so its starts are mixed half-and-half with the product measure.
fn matching_start(f: &Fused, cost: &Array2<f64>, cfg: &SolverConfig) -> Result<Array2<f64>> {
    let vertex = exact_transport(cost, f.p, f.q)?;
    Ok(match cfg.method {
        Method::ConditionalGradient => vertex,
        Method::ProximalPoint => (vertex + super::outer(f.p, f.q)) * 0.5,
    })
}

fn anchor_pairs(n: usize, m: usize, limit: usize) -> Vec<(usize, usize)> {
    if n * m > limit {
        return Vec::new();
    }
    (0..n).flat_map(|a| (0..m).map(move |b| (a, b))).collect()
}

/// Descends from `init`, from the profile matching and, on small problems,
/// from every anchored profile matching (profile cost plus the squared gap
/// between distances to the anchors `a` and `b`).
fn run_oriented(f: &Fused, init: Array2<f64>, cfg: &SolverConfig) -> Result<GwResult> {
    let mut best = descend(f, init, cfg)?;
    if f.alpha == 0.0 || best.value <= 0.0 {
        return Ok(best);
    }
    let profile = profile_cost(f);
    let mut starts = vec![profile.clone()];
    for (a, b) in anchor_pairs(f.p.len(), f.q.len(), cfg.exhaustive_anchor_limit) {
        starts.push(Array2::from_shape_fn(profile.dim(), |(i, j)| {
            let gap = f.c[[a, i]] - f.d[[b, j]];
            profile[[i, j]] + gap * gap
        }));
    }
    for cost in starts {
        let r = descend(f, matching_start(f, &cost, cfg)?, cfg)?;
        if r.value < best.value {
            best = r;
            if best.value <= 0.0 {
                break;
            }
        }
    }
    Ok(best)
}

/// Solves the problem as posed and with the two spaces swapped, keeping
/// the better plan, so the result does not depend on argument order.
fn run(
    c: &MetricMeasureSpace,
    d: &MetricMeasureSpace,
    linear: Option<&Array2<f64>>,
    alpha: f64,
    cfg: &SolverConfig,
) -> Result<GwResult> {
    cfg.validate()?;
    let forward = Fused::new(c, d, linear, alpha);
    let init = initial_plan(&forward, cfg)?;
    let best = run_oriented(&forward, init.clone(), cfg)?;
    if best.value <= 0.0 {
        return Ok(best);
    }
    let swapped_linear = linear.map(|m| m.t().to_owned());
    let backward = Fused::new(d, c, swapped_linear.as_ref(), alpha);
    let r = run_oriented(&backward, init.t().to_owned(), cfg)?;
    let plan = r.coupling.plan().t().to_owned();
    let value = forward.value(&plan);
    if value < best.value {
        return Ok(GwResult {
            value,
            coupling: Coupling::from_parts_unchecked(plan, c.measure().clone(), d.measure().clone()),
            ..r
        });
    }
    Ok(best)
}

/// Squared-loss GW discrepancy between two metric-measure spaces.
///
/// Runs conditional gradient (with the configured linear oracle) or the
/// proximal point method from `cfg.init` and from the anchored starts, in
/// both argument orders, and returns the best local solution. Every
/// accepted step lowers the objective; an exhausted budget returns the
/// current plan with `converged = false`.
pub fn gw_solve(c: &MetricMeasureSpace, d: &MetricMeasureSpace, cfg: &SolverConfig) -> Result<GwResult> {
    run(c, d, None, 1.0, cfg)
}

/// Fused GW: `(1 - trade_off)⟨feature_cost, T⟩ + trade_off · GW(T)`.
pub fn fgw_solve(
    c: &MetricMeasureSpace,
    d: &MetricMeasureSpace,
    feature_cost: &Array2<f64>,
    trade_off: f64,
    cfg: &SolverConfig,
) -> Result<GwResult> {
    if !(0.0..=1.0).contains(&trade_off) {
        return Err(Error::Parameter(format!("trade_off {trade_off} is outside [0, 1]")));
    }
    if feature_cost.dim() != (c.size(), d.size()) {
        return Err(Error::Shape(format!(
            "feature cost {:?} between spaces of size {} and {}",
            feature_cost.dim(),
            c.size(),
            d.size()
        )));
    }
    if feature_cost.iter().any(|&v| !(v >= 0.0) || !v.is_finite()) {
        return Err(Error::Domain("feature cost entries must be finite and nonnegative".into()));
    }
    run(c, d, Some(feature_cost), trade_off, cfg)
}
