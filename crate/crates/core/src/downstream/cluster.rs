use std::collections::BTreeMap;

use rand::Rng as _;
use rayon::prelude::*;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::graph::MetricMeasureSpace;
use crate::ot::{gw_barycenter, gw_barycenter_from, gw_solve, SolverConfig};
use crate::rng::rng;

/// Result of GW k-means.
#[derive(Debug, Clone, Serialize)]
pub struct ClusterAssignment {
    pub labels: Vec<usize>,
    #[serde(skip)]
    pub centroids: Vec<MetricMeasureSpace>,
    /// Sum of member-to-centroid GW values under the final labels.
    pub inertia: f64,
    pub iterations: usize,
    /// Inertia after every assignment step.
    pub inertia_history: Vec<f64>,
}

/// `round(mean node count)`, halves rounded up.
pub fn centroid_size(spaces: &[&MetricMeasureSpace]) -> usize {
    let total: usize = spaces.iter().map(|s| s.size()).sum();
    let n = spaces.len();
    ((2 * total + n) / (2 * n)).max(1)
}

fn gw(a: &MetricMeasureSpace, b: &MetricMeasureSpace, cfg: &SolverConfig) -> Result<f64> {
    Ok(gw_solve(a, b, cfg)?.value.max(0.0))
}

/// `dist[i][c]` between every space and every centroid.
fn distances(spaces: &[MetricMeasureSpace], centroids: &[MetricMeasureSpace], cfg: &SolverConfig) -> Result<Vec<Vec<f64>>> {
    spaces
        .par_iter()
        .map(|s| centroids.iter().map(|c| gw(s, c, cfg)).collect())
        .collect()
}

/// k-means++ seeding: first centre uniform, later ones with probability
/// proportional to the squared distance to the nearest chosen centre.
fn seed_centres(spaces: &[MetricMeasureSpace], k: usize, cfg: &SolverConfig, seed: u64) -> Result<Vec<usize>> {
    let n = spaces.len();
    let mut r = rng(seed);
    let mut chosen = vec![r.random_range(0..n)];
    let mut nearest: Vec<f64> = distances(spaces, &[spaces[chosen[0]].clone()], cfg)?
        .into_iter()
        .map(|d| d[0])
        .collect();
    while chosen.len() < k {
        let weights: Vec<f64> = (0..n)
            .map(|i| if chosen.contains(&i) { 0.0 } else { nearest[i] * nearest[i] })
            .collect();
        let total: f64 = weights.iter().sum();
        let pick = if total > 0.0 {
            let mut u = r.random::<f64>() * total;
            let mut pick = None;
            for (i, &w) in weights.iter().enumerate() {
                if w > 0.0 {
                    pick = Some(i);
                    if u < w {
                        break;
                    }
                    u -= w;
                }
            }
            pick.expect("positive total weight")
        } else {
            let free: Vec<usize> = (0..n).filter(|i| !chosen.contains(i)).collect();
            free[r.random_range(0..free.len())]
        };
        chosen.push(pick);
        let fresh = distances(spaces, &[spaces[pick].clone()], cfg)?;
        for (d, f) in nearest.iter_mut().zip(fresh) {
            *d = d.min(f[0]);
        }
    }
    Ok(chosen)
}

fn argmin(row: &[f64]) -> usize {
    (0..row.len()).fold(0, |best, c| if row[c] < row[best] { c } else { best })
}

/// k-means over GW with barycentric centroids.
///
/// A new barycenter replaces the old centroid only when it does not raise the
/// cluster's summed GW, which keeps the inertia nonincreasing. An empty
/// cluster is reseeded with the space farthest from its centroid.
pub fn gw_kmeans(
    spaces: &[MetricMeasureSpace],
    k: usize,
    cfg: &SolverConfig,
    max_iters: usize,
    seed: u64,
) -> Result<ClusterAssignment> {
    let n = spaces.len();
    if k == 0 || k > n {
        return Err(Error::Parameter(format!("k = {k} must lie in 1..={n}")));
    }
    if max_iters == 0 {
        return Err(Error::Parameter("max_iters must be at least 1".into()));
    }
    let mut centroids: Vec<MetricMeasureSpace> = seed_centres(spaces, k, cfg, seed)?
        .into_iter()
        .map(|i| spaces[i].clone())
        .collect();
    let mut dist = distances(spaces, &centroids, cfg)?;
    let mut labels: Vec<usize> = dist.iter().map(|row| argmin(row)).collect();
    let mut history = vec![labels.iter().enumerate().map(|(i, &c)| dist[i][c]).sum::<f64>()];
    let mut iterations = 0;
    while iterations < max_iters {
        iterations += 1;
        let mut members: BTreeMap<usize, Vec<usize>> = BTreeMap::new();
        for (i, &c) in labels.iter().enumerate() {
            members.entry(c).or_default().push(i);
        }
        let mut taken = Vec::new();
        for c in 0..k {
            let Some(idx) = members.get(&c) else {
                let far = (0..n)
                    .filter(|i| !taken.contains(i))
                    .fold(None, |best: Option<usize>, i| match best {
                        Some(b) if dist[b][labels[b]] >= dist[i][labels[i]] => Some(b),
                        _ => Some(i),
                    })
                    .expect("k <= n leaves a free space");
                taken.push(far);
                centroids[c] = spaces[far].clone();
                continue;
            };
            let group: Vec<MetricMeasureSpace> = idx.iter().map(|&i| spaces[i].clone()).collect();
            let refs: Vec<&MetricMeasureSpace> = group.iter().collect();
            let size = centroid_size(&refs);
            let weights = vec![1.0 / group.len() as f64; group.len()];
            let mut candidates = vec![gw_barycenter(&group, &weights, size, cfg)?];
            if centroids[c].size() == size {
                candidates.push(gw_barycenter_from(&group, &weights, centroids[c].clone(), cfg)?);
            }
            let current: f64 = idx.iter().map(|&i| dist[i][c]).sum();
            let mut best = (current, None);
            for cand in candidates {
                let cost = group.iter().map(|s| gw(s, &cand, cfg)).sum::<Result<f64>>()?;
                if cost <= best.0 {
                    best = (cost, Some(cand));
                }
            }
            if let Some(cand) = best.1 {
                centroids[c] = cand;
            }
        }
        dist = distances(spaces, &centroids, cfg)?;
        // keep the current label on ties so reassignment never raises inertia
        let next: Vec<usize> = dist
            .iter()
            .zip(&labels)
            .map(|(row, &old)| {
                let best = argmin(row);
                if row[old] <= row[best] {
                    old
                } else {
                    best
                }
            })
            .collect();
        history.push(next.iter().enumerate().map(|(i, &c)| dist[i][c]).sum());
        let stable = next == labels;
        labels = next;
        if stable {
            break;
        }
    }
    Ok(ClusterAssignment {
        inertia: *history.last().expect("history is never empty"),
        labels,
        centroids,
        iterations,
        inertia_history: history,
    })
}

fn choose2(x: u64) -> f64 {
    (x * x.saturating_sub(1)) as f64 / 2.0
}

/// Adjusted Rand index. Two partitions that each put everything in one
/// block (or each isolate every item) score 1.
pub fn adjusted_rand_index(a: &[usize], b: &[usize]) -> Result<f64> {
    if a.len() != b.len() {
        return Err(Error::Shape(format!("label vectors of length {} and {}", a.len(), b.len())));
    }
    let mut table: BTreeMap<(usize, usize), u64> = BTreeMap::new();
    let mut rows: BTreeMap<usize, u64> = BTreeMap::new();
    let mut cols: BTreeMap<usize, u64> = BTreeMap::new();
    for (&x, &y) in a.iter().zip(b) {
        *table.entry((x, y)).or_default() += 1;
        *rows.entry(x).or_default() += 1;
        *cols.entry(y).or_default() += 1;
    }
    let index: f64 = table.values().map(|&v| choose2(v)).sum();
    let sa: f64 = rows.values().map(|&v| choose2(v)).sum();
    let sb: f64 = cols.values().map(|&v| choose2(v)).sum();
    let total = choose2(a.len() as u64);
    let expected = if total > 0.0 { sa * sb / total } else { 0.0 };
    let max = (sa + sb) / 2.0;
    if max == expected {
        return Ok(1.0);
    }
    Ok((index - expected) / (max - expected))
}
