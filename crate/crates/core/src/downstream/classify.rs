use std::collections::BTreeMap;
use std::hash::{Hash, Hasher};

use ndarray::{Array2, ArrayView2};
use rand::seq::SliceRandom;
use rayon::prelude::*;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::rng::{derive_seed, rng};

/// Majority vote over the `k` nearest training items. Equal distances are
/// ordered by training position; vote ties go to the smaller mean distance,
/// then to the smaller label.
pub fn knn_classify(
    distances: &Array2<f64>,
    train_idx: &[usize],
    train_labels: &[i64],
    test_idx: &[usize],
    k: usize,
) -> Result<Vec<i64>> {
    if train_idx.len() != train_labels.len() {
        return Err(Error::Shape(format!(
            "{} training indices but {} labels",
            train_idx.len(),
            train_labels.len()
        )));
    }
    if k == 0 || k > train_idx.len() {
        return Err(Error::Parameter(format!("k = {k} must lie in 1..={}", train_idx.len())));
    }
    let n = distances.nrows();
    if let Some(&bad) = train_idx.iter().chain(test_idx).find(|&&i| i >= n || i >= distances.ncols()) {
        return Err(Error::Shape(format!("index {bad} outside the {n}-item distance matrix")));
    }
    Ok(test_idx
        .iter()
        .map(|&t| {
            let mut order: Vec<usize> = (0..train_idx.len()).collect();
            order.sort_by(|&a, &b| distances[[t, train_idx[a]]].total_cmp(&distances[[t, train_idx[b]]]));
            let mut votes: BTreeMap<i64, (usize, f64)> = BTreeMap::new();
            for &a in &order[..k] {
                let e = votes.entry(train_labels[a]).or_default();
                e.0 += 1;
                e.1 += distances[[t, train_idx[a]]];
            }
            let mut best: Option<(i64, usize, f64)> = None;
            for (&label, &(count, sum)) in &votes {
                let mean = sum / count as f64;
                best = match best {
                    Some((_, c, m)) if c > count || (c == count && m <= mean) => best,
                    _ => Some((label, count, mean)),
                };
            }
            best.expect("k >= 1 gives a vote").0
        })
        .collect())
}

fn check_gamma(gamma: f64) -> Result<()> {
    if !(gamma > 0.0) || !gamma.is_finite() {
        return Err(Error::Parameter(format!("gamma {gamma} must be positive and finite")));
    }
    Ok(())
}

/// `exp(-gamma · d)` entrywise, for rectangular test-versus-train blocks.
pub fn kernel_rows(distances: ArrayView2<f64>, gamma: f64) -> Result<Array2<f64>> {
    check_gamma(gamma)?;
    Ok(distances.mapv(|d| (-gamma * d).exp()))
}

/// `K[i][j] = exp(-gamma · d[i][j])` with an exact unit diagonal.
pub fn gw_kernel(distances: &Array2<f64>, gamma: f64) -> Result<Array2<f64>> {
    check_gamma(gamma)?;
    if !distances.is_square() {
        return Err(Error::Shape("kernel needs a square distance matrix".into()));
    }
    let mut k = distances.mapv(|d| (-gamma * d).exp());
    k.diag_mut().fill(1.0);
    Ok(k)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct SvmConfig {
    /// Box constraint `C`.
    pub penalty: f64,
    /// Kernel width the training kernel was built with; recorded only.
    pub gamma: f64,
    pub tolerance: f64,
    pub max_iter: usize,
}

impl SvmConfig {
    pub fn new(penalty: f64, gamma: f64) -> Self {
        SvmConfig {
            penalty,
            gamma,
            tolerance: 1e-3,
            max_iter: 100_000,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SvmModel {
    /// `α_i y_i` for each support vector.
    pub dual_coefs: Vec<f64>,
    pub support_indices: Vec<usize>,
    pub bias: f64,
    pub gamma: f64,
    pub penalty: f64,
    pub train_kernel_fingerprint: u64,
    pub converged: bool,
    pub iterations: usize,
}

fn fingerprint(k: &Array2<f64>) -> u64 {
    let mut h = std::collections::hash_map::DefaultHasher::new();
    k.dim().hash(&mut h);
    for v in k {
        v.to_bits().hash(&mut h);
    }
    h.finish()
}

const TAU: f64 = 1e-12;

/// Dual SVM by SMO with second-order working-set selection. Indefinite
/// kernels are used as given; a nonpositive curvature is replaced by a tiny
/// constant. Hitting `max_iter` returns the current model with
/// `converged = false`.
pub fn svm_train(k: &Array2<f64>, labels: &[i8], cfg: &SvmConfig) -> Result<SvmModel> {
    let n = labels.len();
    if k.dim() != (n, n) {
        return Err(Error::Shape(format!("kernel {:?} for {n} labels", k.dim())));
    }
    if n == 0 {
        return Err(Error::Precondition("no training items".into()));
    }
    if labels.iter().any(|&y| y != 1 && y != -1) {
        return Err(Error::Domain("SVM labels must be +1 or -1".into()));
    }
    if !(cfg.penalty > 0.0) || !cfg.penalty.is_finite() {
        return Err(Error::Parameter(format!("penalty {} must be positive", cfg.penalty)));
    }
    if k.iter().any(|v| !v.is_finite()) {
        return Err(Error::Numeric("kernel has non-finite entries".into()));
    }
    let c = cfg.penalty;
    let y: Vec<f64> = labels.iter().map(|&l| f64::from(l)).collect();
    let mut alpha = vec![0.0; n];
    let mut grad = vec![-1.0; n];
    let up = |a: f64, y: f64| (y > 0.0 && a < c) || (y < 0.0 && a > 0.0);
    let low = |a: f64, y: f64| (y > 0.0 && a > 0.0) || (y < 0.0 && a < c);
    let mut iterations = 0;
    let mut converged = false;
    while iterations < cfg.max_iter {
        let mut i = usize::MAX;
        let mut gmax = f64::NEG_INFINITY;
        for t in 0..n {
            if up(alpha[t], y[t]) && -y[t] * grad[t] >= gmax {
                gmax = -y[t] * grad[t];
                i = t;
            }
        }
        let mut j = usize::MAX;
        let mut gmin = f64::INFINITY;
        let mut best = f64::INFINITY;
        for t in 0..n {
            if !low(alpha[t], y[t]) {
                continue;
            }
            let v = -y[t] * grad[t];
            gmin = gmin.min(v);
            if i != usize::MAX && v < gmax {
                let b = gmax - v;
                let mut a = k[[i, i]] + k[[t, t]] - 2.0 * k[[i, t]];
                if a <= 0.0 {
                    a = TAU;
                }
                if -(b * b) / a <= best {
                    best = -(b * b) / a;
                    j = t;
                }
            }
        }
        if i == usize::MAX || j == usize::MAX || gmax - gmin < cfg.tolerance {
            converged = true;
            break;
        }
        iterations += 1;
        let mut a = k[[i, i]] + k[[j, j]] - 2.0 * k[[i, j]];
        if a <= 0.0 {
            a = TAU;
        }
        let b = -y[i] * grad[i] + y[j] * grad[j];
        let (oi, oj) = (alpha[i], alpha[j]);
        let sum = y[i] * oi + y[j] * oj;
        let mut ai = (oi + y[i] * b / a).clamp(0.0, c);
        let aj = (y[j] * (sum - y[i] * ai)).clamp(0.0, c);
        ai = (y[i] * (sum - y[j] * aj)).clamp(0.0, c);
        alpha[i] = ai;
        alpha[j] = aj;
        let (di, dj) = (ai - oi, aj - oj);
        for t in 0..n {
            grad[t] += y[t] * (y[i] * k[[t, i]] * di + y[j] * k[[t, j]] * dj);
        }
    }
    let (mut ub, mut lb, mut free, mut sum_free) = (f64::INFINITY, f64::NEG_INFINITY, 0usize, 0.0);
    for t in 0..n {
        let yg = y[t] * grad[t];
        let at_upper = alpha[t] >= c;
        let at_lower = alpha[t] <= 0.0;
        if at_upper {
            if y[t] < 0.0 {
                ub = ub.min(yg);
            } else {
                lb = lb.max(yg);
            }
        } else if at_lower {
            if y[t] > 0.0 {
                ub = ub.min(yg);
            } else {
                lb = lb.max(yg);
            }
        } else {
            free += 1;
            sum_free += yg;
        }
    }
    let rho = if free > 0 { sum_free / free as f64 } else { (ub + lb) / 2.0 };
    let support_indices: Vec<usize> = (0..n).filter(|&t| alpha[t] > 0.0).collect();
    Ok(SvmModel {
        dual_coefs: support_indices.iter().map(|&t| alpha[t] * y[t]).collect(),
        support_indices,
        bias: -rho,
        gamma: cfg.gamma,
        penalty: c,
        train_kernel_fingerprint: fingerprint(k),
        converged,
        iterations,
    })
}

/// Signed decision values; row `r` of `k_rows` holds kernel values between
/// test item `r` and every training item.
pub fn svm_decision(model: &SvmModel, k_rows: ArrayView2<f64>) -> Vec<f64> {
    k_rows
        .rows()
        .into_iter()
        .map(|row| {
            model
                .support_indices
                .iter()
                .zip(&model.dual_coefs)
                .map(|(&s, &a)| a * row[s])
                .sum::<f64>()
                + model.bias
        })
        .collect()
}

/// `sign(Σ α_i y_i K(x_i, x) + b)`, with zero mapped to +1.
pub fn svm_predict(model: &SvmModel, k_rows: ArrayView2<f64>) -> Result<Vec<i8>> {
    if let Some(&s) = model.support_indices.iter().max() {
        if s >= k_rows.ncols() {
            return Err(Error::Shape(format!("kernel rows have {} columns, support index {s}", k_rows.ncols())));
        }
    }
    Ok(svm_decision(model, k_rows)
        .into_iter()
        .map(|v| if v >= 0.0 { 1 } else { -1 })
        .collect())
}

/// `10^-7 … 10^7`.
pub fn default_c_grid() -> Vec<f64> {
    (-7..=7).map(|e| 10f64.powi(e)).collect()
}

/// `2^-10 … 2^10`.
pub fn default_gamma_grid() -> Vec<f64> {
    (-10..=10).map(|e| 2f64.powi(e)).collect()
}

/// One stratified train/validation/test split, by item index.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct Split {
    pub train: Vec<usize>,
    pub validation: Vec<usize>,
    pub test: Vec<usize>,
}

/// Per class: `max(1, round(0.1 n))` test items, `max(1, round(0.2 n))`
/// validation items, the rest for training. A class too small to appear in
/// all three parts is a stratification error.
pub fn stratified_split(labels: &[i64], seed: u64) -> Result<Split> {
    let mut classes: BTreeMap<i64, Vec<usize>> = BTreeMap::new();
    for (i, &l) in labels.iter().enumerate() {
        classes.entry(l).or_default().push(i);
    }
    let mut r = rng(seed);
    let mut split = Split {
        train: Vec::new(),
        validation: Vec::new(),
        test: Vec::new(),
    };
    for (label, mut members) in classes {
        let n = members.len();
        let nt = ((n as f64 * 0.1).round() as usize).max(1);
        let nv = ((n as f64 * 0.2).round() as usize).max(1);
        if nt + nv >= n {
            return Err(Error::Stratification(format!(
                "class {label} has {n} items, too few for train, validation and test parts"
            )));
        }
        members.shuffle(&mut r);
        split.test.extend_from_slice(&members[..nt]);
        split.validation.extend_from_slice(&members[nt..nt + nv]);
        split.train.extend_from_slice(&members[nt + nv..]);
    }
    split.train.sort_unstable();
    split.validation.sort_unstable();
    split.test.sort_unstable();
    Ok(split)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SplitOutcome {
    pub penalty: f64,
    pub gamma: f64,
    pub validation_accuracy: f64,
    pub test_accuracy: f64,
    pub converged: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CvReport {
    /// Most frequently selected grid point over the splits; earliest split
    /// breaks ties.
    pub best_c: f64,
    pub best_gamma: f64,
    pub mean_accuracy: f64,
    /// Population standard deviation of the per-split test accuracies.
    pub std: f64,
    pub splits: Vec<SplitOutcome>,
}

fn binary_labels(labels: &[i64]) -> Result<(i64, i64, Vec<i8>)> {
    let mut classes: Vec<i64> = labels.to_vec();
    classes.sort_unstable();
    classes.dedup();
    if classes.len() != 2 {
        return Err(Error::Domain(format!("SVM classification needs 2 classes, found {}", classes.len())));
    }
    let y = labels.iter().map(|&l| if l == classes[1] { 1 } else { -1 }).collect();
    Ok((classes[0], classes[1], y))
}

fn block(m: &Array2<f64>, rows: &[usize], cols: &[usize]) -> Array2<f64> {
    Array2::from_shape_fn((rows.len(), cols.len()), |(a, b)| m[[rows[a], cols[b]]])
}

fn accuracy(pred: &[i8], truth: &[i8]) -> f64 {
    pred.iter().zip(truth).filter(|(p, t)| p == t).count() as f64 / truth.len().max(1) as f64
}

fn fit_score(
    d: &Array2<f64>,
    y: &[i8],
    fit: &[usize],
    eval: &[usize],
    c: f64,
    gamma: f64,
) -> Result<(f64, bool)> {
    let k = gw_kernel(&block(d, fit, fit), gamma)?;
    let yf: Vec<i8> = fit.iter().map(|&i| y[i]).collect();
    let model = svm_train(&k, &yf, &SvmConfig::new(c, gamma))?;
    let rows = kernel_rows(block(d, eval, fit).view(), gamma)?;
    let pred = svm_predict(&model, rows.view())?;
    let truth: Vec<i8> = eval.iter().map(|&i| y[i]).collect();
    Ok((accuracy(&pred, &truth), model.converged))
}

/// Repeated stratified 7:2:1 splits. On each split every `(C, γ)` pair is
/// trained on the training part and scored on the validation part; the best
/// pair (earliest in grid order on ties) is refit on training plus
/// validation and scored on the test part.
pub fn cross_validate(
    distances: &Array2<f64>,
    labels: &[i64],
    c_grid: &[f64],
    gamma_grid: &[f64],
    folds: usize,
    seed: u64,
) -> Result<CvReport> {
    if folds < 2 {
        return Err(Error::Parameter(format!("folds = {folds} must be at least 2")));
    }
    if c_grid.is_empty() || gamma_grid.is_empty() {
        return Err(Error::Parameter("empty hyperparameter grid".into()));
    }
    if distances.dim() != (labels.len(), labels.len()) {
        return Err(Error::Shape(format!("{:?} distances for {} labels", distances.dim(), labels.len())));
    }
    let (_, _, y) = binary_labels(labels)?;
    let grid: Vec<(f64, f64)> = c_grid
        .iter()
        .flat_map(|&c| gamma_grid.iter().map(move |&g| (c, g)))
        .collect();
    let mut splits = Vec::with_capacity(folds);
    for f in 0..folds {
        let split = stratified_split(labels, derive_seed(seed, &[f as u64]))?;
        let scores = grid
            .par_iter()
            .map(|&(c, g)| fit_score(distances, &y, &split.train, &split.validation, c, g))
            .collect::<Result<Vec<_>>>()?;
        let best = (0..grid.len()).fold(0, |b, t| if scores[t].0 > scores[b].0 { t } else { b });
        let (c, g) = grid[best];
        let mut fit = split.train.clone();
        fit.extend_from_slice(&split.validation);
        fit.sort_unstable();
        let (test_accuracy, converged) = fit_score(distances, &y, &fit, &split.test, c, g)?;
        splits.push(SplitOutcome {
            penalty: c,
            gamma: g,
            validation_accuracy: scores[best].0,
            test_accuracy,
            converged: converged && scores[best].1,
        });
    }
    let accs: Vec<f64> = splits.iter().map(|s| s.test_accuracy).collect();
    let mean = accs.iter().sum::<f64>() / accs.len() as f64;
    let std = (accs.iter().map(|a| (a - mean).powi(2)).sum::<f64>() / accs.len() as f64).sqrt();
    let mut counts: Vec<((f64, f64), usize)> = Vec::new();
    for s in &splits {
        match counts.iter_mut().find(|(p, _)| *p == (s.penalty, s.gamma)) {
            Some((_, n)) => *n += 1,
            None => counts.push(((s.penalty, s.gamma), 1)),
        }
    }
    let ((best_c, best_gamma), _) = counts
        .iter()
        .fold(counts[0], |b, &e| if e.1 > b.1 { e } else { b });
    Ok(CvReport {
        best_c,
        best_gamma,
        mean_accuracy: mean,
        std,
        splits,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::array;

    #[test]
    fn knn_examples() {
        let d = array![[0.0, 0.1, 0.2, 9.0], [0.1, 0.0, 1.0, 1.0], [0.2, 1.0, 0.0, 1.0], [9.0, 1.0, 1.0, 0.0]];
        assert_eq!(knn_classify(&d, &[1, 2, 3], &[7, 7, 8], &[0], 3).unwrap(), vec![7]);
        assert_eq!(knn_classify(&d, &[0, 1], &[3, 4], &[0], 1).unwrap(), vec![3]);
        assert_eq!(knn_classify(&d, &[1, 2, 3], &[5, 5, 5], &[0], 2).unwrap(), vec![5]);
        // one vote each: the nearer neighbour's label wins
        assert_eq!(knn_classify(&d, &[2, 1], &[1, 2], &[0], 2).unwrap(), vec![2]);
        assert!(knn_classify(&d, &[1], &[1], &[0], 2).is_err());
    }

    #[test]
    fn knn_tie_on_distance_goes_to_smaller_label() {
        let d = array![[0.0, 1.0, 1.0], [1.0, 0.0, 1.0], [1.0, 1.0, 0.0]];
        assert_eq!(knn_classify(&d, &[1, 2], &[9, 4], &[0], 2).unwrap(), vec![4]);
    }

    #[test]
    fn kernel_examples() {
        let z = Array2::zeros((3, 3));
        assert_eq!(gw_kernel(&z, 1.0).unwrap(), Array2::from_elem((3, 3), 1.0));
        let k = gw_kernel(&array![[0.0, 1.0], [1.0, 0.0]], 50.0).unwrap();
        assert!(k[[0, 1]] < 1e-21);
        assert_eq!(k[[1, 1]], 1.0);
        assert!(gw_kernel(&z, 0.0).is_err());
    }

    fn block_kernel(n: usize) -> (Array2<f64>, Vec<i8>) {
        let y: Vec<i8> = (0..n).map(|i| if i < n / 2 { 1 } else { -1 }).collect();
        let k = Array2::from_shape_fn((n, n), |(i, j)| {
            if i == j {
                1.0
            } else if y[i] == y[j] {
                0.9
            } else {
                0.1
            }
        });
        (k, y)
    }

    #[test]
    fn separable_block_kernel_is_fit_exactly() {
        let (k, y) = block_kernel(8);
        let model = svm_train(&k, &y, &SvmConfig::new(1.0, 1.0)).unwrap();
        assert!(model.converged);
        assert_eq!(svm_predict(&model, k.view()).unwrap(), y);
        let balance: f64 = model.dual_coefs.iter().sum();
        assert!(balance.abs() <= 1e-8);
        assert!(model.dual_coefs.iter().all(|a| a.abs() <= 1.0 + 1e-12));
    }

    #[test]
    fn tiny_penalty_degenerates_to_bias() {
        let (k, y) = block_kernel(6);
        let model = svm_train(&k, &y, &SvmConfig::new(1e-12, 1.0)).unwrap();
        assert!(model.dual_coefs.iter().all(|a| a.abs() <= 1e-12));
        let d = svm_decision(&model, k.view());
        assert!(d.iter().all(|v| (v - model.bias).abs() <= 1e-11));
    }

    #[test]
    fn duplicate_point_gets_the_same_prediction() {
        let (mut k, y) = block_kernel(6);
        for j in 0..6 {
            k[[5, j]] = k[[4, j]];
            k[[j, 5]] = k[[j, 4]];
        }
        k[[5, 5]] = 1.0;
        k[[4, 5]] = 1.0;
        k[[5, 4]] = 1.0;
        let model = svm_train(&k, &y, &SvmConfig::new(10.0, 1.0)).unwrap();
        let p = svm_predict(&model, k.view()).unwrap();
        assert_eq!(p[4], p[5]);
    }

    #[test]
    fn iteration_cap_is_reported() {
        let (k, y) = block_kernel(8);
        let cfg = SvmConfig {
            max_iter: 1,
            ..SvmConfig::new(1.0, 1.0)
        };
        let model = svm_train(&k, &y, &cfg).unwrap();
        assert!(!model.converged);
    }

    #[test]
    fn split_is_stratified_and_disjoint() {
        let labels: Vec<i64> = (0..30).map(|i| i64::from(i % 3 == 0)).collect();
        let s = stratified_split(&labels, 3).unwrap();
        assert_eq!(s.train.len() + s.validation.len() + s.test.len(), 30);
        assert_eq!(s.test.len(), 1 + 2);
        assert_eq!(s.validation.len(), 2 + 4);
        let mut all: Vec<usize> = s.train.iter().chain(&s.validation).chain(&s.test).copied().collect();
        all.sort_unstable();
        assert_eq!(all, (0..30).collect::<Vec<_>>());
        assert!(stratified_split(&[0, 0, 1, 1, 1, 1], 0).is_err());
    }

    #[test]
    fn single_grid_point_is_returned() {
        let labels: Vec<i64> = (0..20).map(|i| i64::from(i >= 10)).collect();
        let d = Array2::from_shape_fn((20, 20), |(i, j)| if labels[i] == labels[j] { 0.0 } else { 5.0 });
        let r = cross_validate(&d, &labels, &[3.0], &[0.5], 3, 0).unwrap();
        assert_eq!((r.best_c, r.best_gamma), (3.0, 0.5));
        assert_eq!(r.mean_accuracy, 1.0);
        assert!(cross_validate(&d, &labels, &[3.0], &[0.5], 1, 0).is_err());
    }
}
