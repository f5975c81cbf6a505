//! Gromov-Wasserstein and fused-GW discrepancies.
//!
//! The squared-loss GW objective between spaces `(C, p)` and `(D, q)` at a
//! coupling `T` is
//!
//! ```text
//! f(T) = Σ_ijkl (C_ik - D_jl)² T_ij T_kl
//!      = rᵀ(C∘C)r + cᵀ(D∘D)c - 2⟨C T D, T⟩,     r = T1, c = Tᵀ1
//! ```
//!
//! a quadratic form in `T`. Solvers work on the factorized form; the direct
//! quadruple sum is kept for small-instance cross-checks.

mod barycenter;
mod cost;
mod emd;
mod objective;
mod pairwise;
mod sinkhorn;
mod solver;

pub use barycenter::{gw_barycenter, gw_barycenter_from, resample_cost};
pub use cost::{cost_from_embedding, cost_from_rows, feature_cost, EmbeddingRows, Metric};
pub use emd::exact_transport;
pub use objective::{gw_objective, gw_objective_direct, kb_value, tensor_gradient};
pub use pairwise::{pairwise_gw_matrix, PairwiseResult};
pub use sinkhorn::{round_to_marginals, sinkhorn, SinkhornOutput};
pub use solver::{fgw_solve, gw_solve};

use ndarray::{Array1, Array2, Axis};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Marginal tolerance for a plan to count as a coupling.
pub const FEASIBILITY_TOL: f64 = 1e-8;

/// Pointwise loss inside the GW sum.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Loss {
    #[default]
    SquaredEuclidean,
    /// `a log(a/b) - a + b`, with `0 log 0 = 0`.
    Kl,
}

/// Nonnegative transport plan with prescribed marginals.
#[derive(Debug, Clone, PartialEq)]
pub struct Coupling {
    plan: Array2<f64>,
    row_marginal: Array1<f64>,
    col_marginal: Array1<f64>,
}

impl Coupling {
    /// Validates nonnegativity and marginals within [`FEASIBILITY_TOL`].
    pub fn new(plan: Array2<f64>, p: Array1<f64>, q: Array1<f64>) -> Result<Self> {
        if plan.dim() != (p.len(), q.len()) {
            return Err(Error::Shape(format!(
                "plan {:?} does not match marginals of length {} and {}",
                plan.dim(),
                p.len(),
                q.len()
            )));
        }
        if let Some(v) = plan.iter().find(|&&v| !(v >= 0.0) || !v.is_finite()) {
            return Err(Error::Domain(format!("plan entry {v} is not a finite nonnegative number")));
        }
        let residual = marginal_residual(&plan, &p, &q);
        if residual > FEASIBILITY_TOL {
            return Err(Error::Precondition(format!("plan marginals off by {residual:e}")));
        }
        Ok(Coupling {
            plan,
            row_marginal: p,
            col_marginal: q,
        })
    }

    /// The product measure `p qᵀ`.
    pub fn product(p: &Array1<f64>, q: &Array1<f64>) -> Self {
        let plan = outer(p, q);
        Coupling {
            plan,
            row_marginal: p.clone(),
            col_marginal: q.clone(),
        }
    }

    pub(crate) fn from_parts_unchecked(plan: Array2<f64>, p: Array1<f64>, q: Array1<f64>) -> Self {
        Coupling {
            plan,
            row_marginal: p,
            col_marginal: q,
        }
    }

    pub fn plan(&self) -> &Array2<f64> {
        &self.plan
    }

    pub fn row_marginal(&self) -> &Array1<f64> {
        &self.row_marginal
    }

    pub fn col_marginal(&self) -> &Array1<f64> {
        &self.col_marginal
    }

    /// Largest absolute deviation of the row or column sums from the marginals.
    pub fn residual(&self) -> f64 {
        marginal_residual(&self.plan, &self.row_marginal, &self.col_marginal)
    }

    pub fn transposed(&self) -> Coupling {
        Coupling {
            plan: self.plan.t().to_owned(),
            row_marginal: self.col_marginal.clone(),
            col_marginal: self.row_marginal.clone(),
        }
    }
}

pub(crate) fn outer(p: &Array1<f64>, q: &Array1<f64>) -> Array2<f64> {
    Array2::from_shape_fn((p.len(), q.len()), |(i, j)| p[i] * q[j])
}

pub(crate) fn marginal_residual(plan: &Array2<f64>, p: &Array1<f64>, q: &Array1<f64>) -> f64 {
    let rows = plan.sum_axis(Axis(1));
    let cols = plan.sum_axis(Axis(0));
    let r = rows.iter().zip(p).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
    let c = cols.iter().zip(q).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
    r.max(c)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Method {
    /// Frank-Wolfe with exact line search.
    #[default]
    ConditionalGradient,
    /// Successive KL-proximal linearizations solved by Sinkhorn.
    ProximalPoint,
}

/// Linear minimization oracle used inside conditional gradient.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum InnerSolver {
    /// Exact transport by the network simplex; returns polytope vertices.
    #[default]
    Exact,
    /// Entropic transport by log-domain Sinkhorn, rounded onto the marginals.
    Sinkhorn,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Init {
    /// `T0 = p qᵀ`.
    #[default]
    ProductMeasure,
    /// A caller-supplied starting plan; must be a coupling of the two measures.
    Provided(Array2<f64>),
}

/// Outer/inner iteration controls shared by every solver.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SolverConfig {
    pub method: Method,
    pub inner: InnerSolver,
    pub max_outer_iters: usize,
    /// Stop when the relative objective decrease falls to this level.
    pub outer_tol: f64,
    /// Entropic strength, relative to the mean absolute gradient entry.
    pub inner_reg: f64,
    pub inner_iters: usize,
    pub inner_tol: f64,
    pub init: Init,
    /// When `n·m` is at most this, the solver is also started from the
    /// anchor matching of every point pair and keeps the best local
    /// solution. Larger problems use `init` alone.
    pub exhaustive_anchor_limit: usize,
    pub seed: u64,
}

impl Default for SolverConfig {
    fn default() -> Self {
        SolverConfig {
            method: Method::ConditionalGradient,
            inner: InnerSolver::Exact,
            max_outer_iters: 1000,
            outer_tol: 1e-9,
            inner_reg: 1e-2,
            inner_iters: 2000,
            inner_tol: 1e-9,
            init: Init::ProductMeasure,
            exhaustive_anchor_limit: 100,
            seed: 0,
        }
    }
}

impl SolverConfig {
    pub fn proximal() -> Self {
        SolverConfig {
            method: Method::ProximalPoint,
            inner: InnerSolver::Sinkhorn,
            inner_reg: 5e-2,
            max_outer_iters: 200,
            ..SolverConfig::default()
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.outer_tol > 0.0 && self.inner_tol > 0.0) {
            return Err(Error::Parameter("solver tolerances must be positive".into()));
        }
        if !(self.inner_reg > 0.0) {
            return Err(Error::Parameter("inner regularization must be positive".into()));
        }
        if self.max_outer_iters == 0 || self.inner_iters == 0 {
            return Err(Error::Parameter("iteration budgets must be positive".into()));
        }
        Ok(())
    }
}

/// Solver output. `value` is the objective evaluated at `coupling`.
#[derive(Debug, Clone, PartialEq)]
pub struct GwResult {
    pub value: f64,
    pub coupling: Coupling,
    pub iterations: usize,
    pub converged: bool,
    /// Objective after each accepted step, starting with the initial plan.
    pub history: Vec<f64>,
}
