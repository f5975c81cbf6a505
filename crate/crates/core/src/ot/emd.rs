//! Exact discrete optimal transport by the transportation simplex.
//!
//! The basis is a spanning tree of the bipartite row/column graph with
//! `n + m - 1` cells (degenerate zero-flow cells included). Pivots use the
//! most negative reduced cost; after a run of degenerate pivots the entering
//! rule switches to Bland's lowest-index choice, which cannot cycle.

use ndarray::{Array1, Array2};

use crate::error::{Error, Result};

struct Basis {
    n: usize,
    m: usize,
    cells: Vec<(usize, usize)>,
}

impl Basis {
    /// Tree adjacency: nodes `0..n` are rows, `n..n+m` columns; each entry
    /// holds `(neighbor, cell index)`.
    fn adjacency(&self) -> Vec<Vec<(usize, usize)>> {
        let mut adj = vec![Vec::new(); self.n + self.m];
        for (k, &(i, j)) in self.cells.iter().enumerate() {
            adj[i].push((self.n + j, k));
            adj[self.n + j].push((i, k));
        }
        adj
    }
}

/// Greedy least-cost start. Every allocation retires exactly one row or
/// column (both on the final cell), which yields a spanning-tree basis.
fn initial_basis(cost: &Array2<f64>, p: &[f64], q: &[f64], flow: &mut Array2<f64>) -> Basis {
    let (n, m) = cost.dim();
    let mut supply = p.to_vec();
    let mut demand = q.to_vec();
    let mut row_open = vec![true; n];
    let mut col_open = vec![true; m];
    let (mut rows_left, mut cols_left) = (n, m);
    let mut order: Vec<(usize, usize)> = (0..n).flat_map(|i| (0..m).map(move |j| (i, j))).collect();
    order.sort_by(|a, b| cost[*a].total_cmp(&cost[*b]).then(a.cmp(b)));
    let mut cells = Vec::with_capacity(n + m - 1);
    for (i, j) in order {
        if !row_open[i] || !col_open[j] {
            continue;
        }
        let x = supply[i].min(demand[j]).max(0.0);
        flow[[i, j]] = x;
        cells.push((i, j));
        if rows_left == 1 && cols_left == 1 {
            break;
        }
        if (supply[i] <= demand[j] && rows_left > 1) || cols_left == 1 {
            row_open[i] = false;
            rows_left -= 1;
            demand[j] -= x;
        } else {
            col_open[j] = false;
            cols_left -= 1;
            supply[i] -= x;
        }
    }
    Basis { n, m, cells }
}

/// Row and column potentials with `u_i + v_j = c_ij` on every basic cell.
fn potentials(basis: &Basis, adj: &[Vec<(usize, usize)>], cost: &Array2<f64>) -> (Vec<f64>, Vec<f64>) {
    let (n, m) = (basis.n, basis.m);
    let mut pot = vec![f64::NAN; n + m];
    pot[0] = 0.0;
    let mut stack = vec![0];
    while let Some(a) = stack.pop() {
        for &(b, k) in &adj[a] {
            if pot[b].is_nan() {
                let (i, j) = basis.cells[k];
                pot[b] = cost[[i, j]] - pot[a];
                stack.push(b);
            }
        }
    }
    (pot[..n].to_vec(), pot[n..].to_vec())
}

/// Cells on the tree path from column node `col` back to row node `row`, in
/// order starting at `col`.
fn tree_path(basis: &Basis, adj: &[Vec<(usize, usize)>], row: usize, col: usize) -> Vec<usize> {
    let total = basis.n + basis.m;
    let mut parent = vec![(usize::MAX, usize::MAX); total];
    parent[row] = (row, usize::MAX);
    let mut stack = vec![row];
    while let Some(a) = stack.pop() {
        if a == basis.n + col {
            break;
        }
        for &(b, k) in &adj[a] {
            if parent[b].0 == usize::MAX {
                parent[b] = (a, k);
                stack.push(b);
            }
        }
    }
    let mut path = Vec::new();
    let mut node = basis.n + col;
    while node != row {
        let (up, k) = parent[node];
        path.push(k);
        node = up;
    }
    path
}

/// Minimum-cost plan between marginals `p` and `q`.
///
/// The returned plan has exactly the prescribed row and column sums up to
/// floating-point rounding. The masses must agree to 1e-9.
pub fn exact_transport(cost: &Array2<f64>, p: &Array1<f64>, q: &Array1<f64>) -> Result<Array2<f64>> {
    let (n, m) = cost.dim();
    if n == 0 || m == 0 || p.len() != n || q.len() != m {
        return Err(Error::Shape(format!(
            "cost {:?} with marginals of length {} and {}",
            cost.dim(),
            p.len(),
            q.len()
        )));
    }
    if (p.sum() - q.sum()).abs() > 1e-9 {
        return Err(Error::Precondition(format!("masses differ: {} vs {}", p.sum(), q.sum())));
    }
    if cost.iter().any(|c| !c.is_finite()) {
        return Err(Error::Numeric("non-finite transport cost".into()));
    }
    let mut flow = Array2::zeros((n, m));
    let mut basis = initial_basis(cost, p.as_slice().unwrap(), q.as_slice().unwrap(), &mut flow);
    let mut in_basis = Array2::from_elem((n, m), false);
    for &(i, j) in &basis.cells {
        in_basis[[i, j]] = true;
    }
    let scale = cost.iter().fold(0.0f64, |a, c| a.max(c.abs())).max(1e-300);
    let tol = 1e-12 * scale;
    let max_pivots = 1000 + 50 * n * m;
    let mut degenerate_run = 0;
    for _ in 0..max_pivots {
        let adj = basis.adjacency();
        let (u, v) = potentials(&basis, &adj, cost);
        let bland = degenerate_run > n + m;
        let mut entering = None;
        let mut best = -tol;
        'scan: for i in 0..n {
            for j in 0..m {
                if in_basis[[i, j]] {
                    continue;
                }
                let reduced = cost[[i, j]] - u[i] - v[j];
                if reduced < best {
                    entering = Some((i, j));
                    if bland {
                        break 'scan;
                    }
                    best = reduced;
                }
            }
        }
        let Some((ei, ej)) = entering else {
            return Ok(flow);
        };
        let path = tree_path(&basis, &adj, ei, ej);
        // path cells alternate: donors at even positions, receivers at odd
        let mut theta = f64::INFINITY;
        let mut leaving = usize::MAX;
        for (pos, &k) in path.iter().enumerate() {
            if pos % 2 == 0 {
                let x = flow[basis.cells[k]];
                let better = x < theta || (x == theta && bland && basis.cells[k] < basis.cells[leaving]);
                if better {
                    theta = x;
                    leaving = k;
                }
            }
        }
        degenerate_run = if theta <= 0.0 { degenerate_run + 1 } else { 0 };
        for (pos, &k) in path.iter().enumerate() {
            let cell = basis.cells[k];
            if pos % 2 == 0 {
                flow[cell] = (flow[cell] - theta).max(0.0);
            } else {
                flow[cell] += theta;
            }
        }
        flow[[ei, ej]] = theta;
        let out = basis.cells[leaving];
        flow[out] = 0.0;
        in_basis[out] = false;
        in_basis[[ei, ej]] = true;
        basis.cells[leaving] = (ei, ej);
    }
    Err(Error::Numeric(format!("transport simplex exceeded {max_pivots} pivots")))
}
