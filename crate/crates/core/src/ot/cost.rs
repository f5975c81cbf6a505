use ndarray::{Array2, ArrayView1};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::graph::MetricMeasureSpace;
use crate::ldp::{EmbeddingMatrix, EncodedEmbedding};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Metric {
    #[default]
    Euclidean,
    /// `1 - cos(a, b)`. A zero row is at distance 1 from any nonzero row and 0
    /// from another zero row.
    Cosine,
}

/// Anything that can be read as an `n × h` real matrix of node embeddings.
pub trait EmbeddingRows {
    fn rows(&self) -> Array2<f64>;
}

impl EmbeddingRows for EmbeddingMatrix {
    fn rows(&self) -> Array2<f64> {
        self.values().clone()
    }
}

impl EmbeddingRows for EncodedEmbedding {
    fn rows(&self) -> Array2<f64> {
        self.to_f64()
    }
}

impl EmbeddingRows for Array2<f64> {
    fn rows(&self) -> Array2<f64> {
        self.clone()
    }
}

fn distance(a: ArrayView1<f64>, b: ArrayView1<f64>, metric: Metric) -> f64 {
    match metric {
        Metric::Euclidean => a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum::<f64>().sqrt(),
        Metric::Cosine => {
            let (na, nb) = (a.dot(&a).sqrt(), b.dot(&b).sqrt());
            match (na == 0.0, nb == 0.0) {
                (true, true) => 0.0,
                (true, false) | (false, true) => 1.0,
                _ => (1.0 - a.dot(&b) / (na * nb)).max(0.0),
            }
        }
    }
}

/// Pairwise row distances with the uniform measure.
pub fn cost_from_rows(rows: &Array2<f64>, metric: Metric) -> Result<MetricMeasureSpace> {
    let n = rows.nrows();
    if n == 0 {
        return Err(Error::Precondition("embedding has no rows".into()));
    }
    if rows.iter().any(|v| !v.is_finite()) {
        return Err(Error::Numeric("embedding has non-finite entries".into()));
    }
    let mut cost = Array2::zeros((n, n));
    for i in 0..n {
        for j in i + 1..n {
            let d = distance(rows.row(i), rows.row(j), metric);
            cost[[i, j]] = d;
            cost[[j, i]] = d;
        }
    }
    MetricMeasureSpace::uniform(cost)
}

pub fn cost_from_embedding<E: EmbeddingRows + ?Sized>(h: &E, metric: Metric) -> Result<MetricMeasureSpace> {
    cost_from_rows(&h.rows(), metric)
}

/// Squared Euclidean distances between the rows of `a` and the rows of `b`.
pub fn feature_cost(a: &Array2<f64>, b: &Array2<f64>) -> Result<Array2<f64>> {
    if a.ncols() != b.ncols() {
        return Err(Error::Shape(format!(
            "feature widths differ: {} vs {}",
            a.ncols(),
            b.ncols()
        )));
    }
    Ok(Array2::from_shape_fn((a.nrows(), b.nrows()), |(i, j)| {
        a.row(i).iter().zip(b.row(j)).map(|(x, y)| (x - y) * (x - y)).sum()
    }))
}
