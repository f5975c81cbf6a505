//! Multi-bit ε-LDP encoder for node-embedding matrices.
//!
//! For each row, `m` of the `h` columns are sampled without replacement. A
//! sampled cell with value `x` becomes `+1` with probability
//!
//! ```text
//! p(x) = 1/(e^c + 1) + (x - α)/(β - α) · (e^c - 1)/(e^c + 1),   c = ε/(m·n)
//! ```
//!
//! and `-1` otherwise; unsampled cells become `0`. Over the `m·n` released
//! cells the per-cell likelihood ratio `e^c` composes to exactly `e^ε`.

use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use ndarray::Array2;
use rand::Rng as _;

use crate::error::{Error, Result};
use crate::graph::Graph;
use crate::rng::rng;

/// Node embedding with every entry inside `[alpha, beta]`.
#[derive(Debug, Clone, PartialEq)]
pub struct EmbeddingMatrix {
    values: Array2<f64>,
    alpha: f64,
    beta: f64,
}

impl EmbeddingMatrix {
    pub fn new(values: Array2<f64>, alpha: f64, beta: f64) -> Result<Self> {
        if !(alpha < beta) || !alpha.is_finite() || !beta.is_finite() {
            return Err(Error::Parameter(format!("bounds [{alpha}, {beta}] must be finite with alpha < beta")));
        }
        if let Some(((i, j), v)) = values.indexed_iter().find(|(_, &v)| !(v >= alpha && v <= beta)) {
            return Err(Error::Domain(format!("entry ({i}, {j}) = {v} outside [{alpha}, {beta}]")));
        }
        Ok(EmbeddingMatrix { values, alpha, beta })
    }

    pub fn values(&self) -> &Array2<f64> {
        &self.values
    }

    pub fn alpha(&self) -> f64 {
        self.alpha
    }

    pub fn beta(&self) -> f64 {
        self.beta
    }

    pub fn nrows(&self) -> usize {
        self.values.nrows()
    }
}

/// Encoder output over `{-1, 0, +1}` with exactly `m` nonzeros per row.
#[derive(Debug, Clone, PartialEq)]
pub struct EncodedEmbedding {
    values: Array2<i8>,
    epsilon: f64,
    m: usize,
    seed: u64,
}

impl EncodedEmbedding {
    pub fn values(&self) -> &Array2<i8> {
        &self.values
    }

    pub fn epsilon(&self) -> f64 {
        self.epsilon
    }

    pub fn m(&self) -> usize {
        self.m
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn nrows(&self) -> usize {
        self.values.nrows()
    }

    /// Values as reals, ready for distance computations.
    pub fn to_f64(&self) -> Array2<f64> {
        self.values.mapv(f64::from)
    }

    /// Budget spent on each released cell, `ε / (m·n)`.
    pub fn cell_epsilon(&self) -> f64 {
        cell_epsilon(self.epsilon, self.m, self.nrows())
    }

    /// CSV with a `# n=..,h=..,epsilon=..,m=..,seed=..` header line.
    pub fn to_csv(&self) -> String {
        let (n, h) = self.values.dim();
        let mut s = format!("# n={n},h={h},epsilon={},m={},seed={}\n", self.epsilon, self.m, self.seed);
        for row in self.values.rows() {
            let cells: Vec<String> = row.iter().map(i8::to_string).collect();
            writeln!(s, "{}", cells.join(",")).unwrap();
        }
        s
    }

    pub fn from_csv(text: &str) -> Result<Self> {
        let mut lines = text.lines().enumerate();
        let (_, header) = lines
            .next()
            .ok_or_else(|| Error::format("encoded", 1, "empty file"))?;
        let header = header
            .strip_prefix('#')
            .ok_or_else(|| Error::format("encoded", 1, "missing header"))?;
        let mut fields = std::collections::HashMap::new();
        for kv in header.trim().split(',') {
            let (k, v) = kv
                .split_once('=')
                .ok_or_else(|| Error::format("encoded", 1, format!("bad header field {kv:?}")))?;
            fields.insert(k.trim(), v.trim());
        }
        let get = |k: &str| {
            fields
                .get(k)
                .copied()
                .ok_or_else(|| Error::format("encoded", 1, format!("header lacks {k}")))
        };
        let bad = |k: &str| Error::format("encoded", 1, format!("malformed {k}"));
        let n: usize = get("n")?.parse().map_err(|_| bad("n"))?;
        let h: usize = get("h")?.parse().map_err(|_| bad("h"))?;
        let epsilon: f64 = get("epsilon")?.parse().map_err(|_| bad("epsilon"))?;
        let m: usize = get("m")?.parse().map_err(|_| bad("m"))?;
        let seed: u64 = get("seed")?.parse().map_err(|_| bad("seed"))?;
        let mut values = Vec::with_capacity(n * h);
        let mut rows = 0;
        for (i, line) in lines {
            if line.trim().is_empty() {
                continue;
            }
            let row: Vec<i8> = line
                .split(',')
                .map(|t| match t.trim() {
                    "-1" => Ok(-1),
                    "0" => Ok(0),
                    "1" => Ok(1),
                    other => Err(Error::format("encoded", i + 1, format!("{other:?} is not in {{-1,0,1}}"))),
                })
                .collect::<Result<_>>()?;
            if row.len() != h {
                return Err(Error::format("encoded", i + 1, format!("expected {h} columns")));
            }
            if row.iter().filter(|&&v| v != 0).count() != m {
                return Err(Error::format("encoded", i + 1, format!("expected {m} nonzero cells")));
            }
            values.extend(row);
            rows += 1;
        }
        if rows != n {
            return Err(Error::format("encoded", rows + 1, format!("expected {n} rows, found {rows}")));
        }
        let values = Array2::from_shape_vec((n, h), values).map_err(|e| Error::Shape(e.to_string()))?;
        Ok(EncodedEmbedding { values, epsilon, m, seed })
    }

    pub fn write_csv(&self, path: impl AsRef<Path>) -> Result<()> {
        fs::write(path, self.to_csv())?;
        Ok(())
    }
}

/// `max(1, min(d, ⌊ε / 2.18⌋))`.
pub fn optimal_m(epsilon: f64, d: usize) -> usize {
    let m = (epsilon / 2.18).floor();
    let m = if m.is_finite() && m > 0.0 { m as usize } else { 0 };
    m.min(d).max(1)
}

/// Default per-graph budget `1 / |V|`.
pub fn default_epsilon(g: &Graph) -> f64 {
    1.0 / g.node_count() as f64
}

pub fn cell_epsilon(epsilon: f64, m: usize, n: usize) -> f64 {
    epsilon / (m as f64 * n as f64)
}

/// Probability of emitting `+1` for a sampled cell.
///
/// Written through `tanh(c/2) = (e^c - 1)/(e^c + 1)` so large budgets do not
/// overflow.
pub fn plus_probability(value: f64, alpha: f64, beta: f64, cell_epsilon: f64) -> f64 {
    let t = (cell_epsilon / 2.0).tanh();
    let u = (value - alpha) / (beta - alpha);
    (1.0 - t) / 2.0 + u * t
}

/// Encode `h` with total budget `epsilon` releasing `m` cells per row.
pub fn multibit_encode(h: &EmbeddingMatrix, epsilon: f64, m: usize, seed: u64) -> Result<EncodedEmbedding> {
    let (n, width) = h.values.dim();
    if !(epsilon > 0.0) || !epsilon.is_finite() {
        return Err(Error::Parameter(format!("epsilon {epsilon} must be positive and finite")));
    }
    if m < 1 || m > width {
        return Err(Error::Parameter(format!("m = {m} must lie in 1..={width}")));
    }
    let c = cell_epsilon(epsilon, m, n);
    let mut r = rng(seed);
    let mut out = Array2::<i8>::zeros((n, width));
    for i in 0..n {
        let mut cols = rand::seq::index::sample(&mut r, width, m).into_vec();
        cols.sort_unstable();
        for j in cols {
            let p = plus_probability(h.values[[i, j]], h.alpha, h.beta, c);
            out[[i, j]] = if r.random::<f64>() < p { 1 } else { -1 };
        }
    }
    Ok(EncodedEmbedding {
        values: out,
        epsilon,
        m,
        seed,
    })
}

/// Monte-Carlo estimate of the single-cell likelihood ratios between inputs
/// `v1` and `v2`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RatioProbe {
    pub ratio_plus: f64,
    pub ratio_minus: f64,
    pub stderr_plus: f64,
    pub stderr_minus: f64,
    /// Set when the denominator count was zero; the ratio is then `+inf`.
    pub unbounded_plus: bool,
    pub unbounded_minus: bool,
    /// The theoretical per-cell bound `e^{ε/(m·n)}`.
    pub bound: f64,
}

fn ratio_with_error(k1: u64, k2: u64, trials: u64) -> (f64, f64, bool) {
    if k2 == 0 {
        return (f64::INFINITY, f64::INFINITY, true);
    }
    let t = trials as f64;
    let (p1, p2) = (k1 as f64 / t, k2 as f64 / t);
    let ratio = p1 / p2;
    // delta method on log(p1/p2) with independent binomial counts
    let var_log = if k1 == 0 { 0.0 } else { (1.0 - p1) / k1 as f64 } + (1.0 - p2) / k2 as f64;
    (ratio, ratio * var_log.sqrt(), false)
}

#[allow(clippy::too_many_arguments)]
pub fn ldp_ratio_probe(
    v1: f64,
    v2: f64,
    alpha: f64,
    beta: f64,
    epsilon: f64,
    m: usize,
    n: usize,
    trials: u64,
    seed: u64,
) -> Result<RatioProbe> {
    if !(alpha < beta) {
        return Err(Error::Parameter("alpha must be below beta".into()));
    }
    for v in [v1, v2] {
        if !(v >= alpha && v <= beta) {
            return Err(Error::Domain(format!("{v} outside [{alpha}, {beta}]")));
        }
    }
    if trials < 10_000 {
        return Err(Error::Parameter(format!("{trials} trials, at least 10^4 required")));
    }
    if m == 0 || n == 0 || !(epsilon > 0.0) {
        return Err(Error::Parameter("epsilon, m and n must be positive".into()));
    }
    let c = cell_epsilon(epsilon, m, n);
    let count = |v: f64, stream: u64| {
        let p = plus_probability(v, alpha, beta, c);
        let mut r = rng(crate::rng::derive_seed(seed, &[stream]));
        (0..trials).filter(|_| r.random::<f64>() < p).count() as u64
    };
    let plus1 = count(v1, 1);
    let plus2 = count(v2, 2);
    let (ratio_plus, stderr_plus, unbounded_plus) = ratio_with_error(plus1, plus2, trials);
    let (ratio_minus, stderr_minus, unbounded_minus) = ratio_with_error(trials - plus1, trials - plus2, trials);
    Ok(RatioProbe {
        ratio_plus,
        ratio_minus,
        stderr_plus,
        stderr_minus,
        unbounded_plus,
        unbounded_minus,
        bound: c.exp(),
    })
}

/// Running total of budget released per client.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct BudgetLedger {
    releases: Vec<f64>,
}

impl BudgetLedger {
    pub fn record(&mut self, epsilon: f64) {
        self.releases.push(epsilon);
    }

    pub fn releases(&self) -> usize {
        self.releases.len()
    }

    /// Sequential composition of all releases.
    pub fn cumulative(&self) -> f64 {
        self.releases.iter().sum()
    }
}
