//! Graphs, metric-measure spaces and dataset ingestion.

mod apsp;
mod edgelist;
mod subgraph;
pub mod synthetic;
mod tu;

pub use apsp::apsp;
pub use edgelist::load_edge_list_graph;
pub use subgraph::khop_subgraph;
pub use tu::{load_tu_dataset, write_tu_dataset};

use ndarray::{Array1, Array2};

use crate::error::{Error, Result};

/// Undirected simple graph with optional node features and labels.
///
/// Immutable after construction. Edges are stored once as `(u, v)` with
/// `u < v`, sorted.
#[derive(Debug, Clone, PartialEq)]
pub struct Graph {
    node_count: usize,
    edges: Vec<(usize, usize)>,
    neighbors: Vec<Vec<usize>>,
    features: Array2<f64>,
    node_labels: Option<Vec<usize>>,
    graph_label: Option<i64>,
}

impl Graph {
    /// Build a graph from an edge list. Duplicate edges (in either
    /// orientation) collapse to one; self-loops and out-of-range endpoints
    /// are rejected.
    pub fn new(node_count: usize, edges: impl IntoIterator<Item = (usize, usize)>) -> Result<Self> {
        if node_count == 0 {
            return Err(Error::Precondition("graph must have at least one node".into()));
        }
        let mut list = Vec::new();
        for (u, v) in edges {
            if u == v {
                return Err(Error::Precondition(format!("self-loop on node {u}")));
            }
            if u >= node_count || v >= node_count {
                return Err(Error::Precondition(format!(
                    "edge ({u}, {v}) references a node outside 0..{node_count}"
                )));
            }
            list.push((u.min(v), u.max(v)));
        }
        list.sort_unstable();
        list.dedup();
        let mut neighbors = vec![Vec::new(); node_count];
        for &(u, v) in &list {
            neighbors[u].push(v);
            neighbors[v].push(u);
        }
        for adj in &mut neighbors {
            adj.sort_unstable();
        }
        Ok(Graph {
            node_count,
            edges: list,
            neighbors,
            features: Array2::zeros((node_count, 0)),
            node_labels: None,
            graph_label: None,
        })
    }

    pub fn with_features(mut self, features: Array2<f64>) -> Result<Self> {
        if features.nrows() != self.node_count {
            return Err(Error::Shape(format!(
                "feature matrix has {} rows for {} nodes",
                features.nrows(),
                self.node_count
            )));
        }
        self.features = features;
        Ok(self)
    }

    pub fn with_node_labels(mut self, labels: Vec<usize>) -> Result<Self> {
        if labels.len() != self.node_count {
            return Err(Error::Shape(format!(
                "{} node labels for {} nodes",
                labels.len(),
                self.node_count
            )));
        }
        self.node_labels = Some(labels);
        Ok(self)
    }

    pub fn with_graph_label(mut self, label: i64) -> Self {
        self.graph_label = Some(label);
        self
    }

    pub fn node_count(&self) -> usize {
        self.node_count
    }

    pub fn edge_count(&self) -> usize {
        self.edges.len()
    }

    pub fn edges(&self) -> &[(usize, usize)] {
        &self.edges
    }

    /// Neighbors of `u` in ascending id order.
    pub fn neighbors(&self, u: usize) -> &[usize] {
        &self.neighbors[u]
    }

    pub fn degree(&self, u: usize) -> usize {
        self.neighbors[u].len()
    }

    pub fn has_edge(&self, u: usize, v: usize) -> bool {
        self.neighbors[u].binary_search(&v).is_ok()
    }

    pub fn features(&self) -> &Array2<f64> {
        &self.features
    }

    pub fn node_labels(&self) -> Option<&[usize]> {
        self.node_labels.as_deref()
    }

    pub fn graph_label(&self) -> Option<i64> {
        self.graph_label
    }

    /// Dense 0/1 adjacency matrix.
    pub fn adjacency(&self) -> Array2<f64> {
        let mut a = Array2::zeros((self.node_count, self.node_count));
        for &(u, v) in &self.edges {
            a[[u, v]] = 1.0;
            a[[v, u]] = 1.0;
        }
        a
    }

    /// One-hot encoding of the node labels over `classes` columns.
    pub fn one_hot_labels(&self, classes: usize) -> Result<Array2<f64>> {
        let labels = self
            .node_labels
            .as_ref()
            .ok_or_else(|| Error::Precondition("graph has no node labels".into()))?;
        let mut x = Array2::zeros((self.node_count, classes));
        for (i, &l) in labels.iter().enumerate() {
            if l >= classes {
                return Err(Error::Domain(format!("node label {l} not below {classes}")));
            }
            x[[i, l]] = 1.0;
        }
        Ok(x)
    }

    /// One-hot degree encoding, degrees above `max_degree` share the last column.
    pub fn one_hot_degree(&self, max_degree: usize) -> Array2<f64> {
        let mut x = Array2::zeros((self.node_count, max_degree + 1));
        for u in 0..self.node_count {
            x[[u, self.degree(u).min(max_degree)]] = 1.0;
        }
        x
    }

    /// Induced subgraph on `nodes`; local id `i` is `nodes[i]`.
    pub fn induced(&self, nodes: &[usize]) -> Result<Graph> {
        let mut local = vec![usize::MAX; self.node_count];
        for (i, &u) in nodes.iter().enumerate() {
            local[u] = i;
        }
        let edges = self
            .edges
            .iter()
            .filter(|(u, v)| local[*u] != usize::MAX && local[*v] != usize::MAX)
            .map(|&(u, v)| (local[u], local[v]));
        let mut g = Graph::new(nodes.len(), edges)?;
        g.features = self.features.select(ndarray::Axis(0), nodes);
        g.node_labels = self
            .node_labels
            .as_ref()
            .map(|l| nodes.iter().map(|&u| l[u]).collect());
        g.graph_label = self.graph_label;
        Ok(g)
    }

    /// Copy of the graph with one edge removed.
    pub fn without_edge(&self, u: usize, v: usize) -> Result<Graph> {
        let key = (u.min(v), u.max(v));
        let mut g = Graph::new(
            self.node_count,
            self.edges.iter().copied().filter(|&e| e != key),
        )?;
        g.features = self.features.clone();
        g.node_labels = self.node_labels.clone();
        g.graph_label = self.graph_label;
        Ok(g)
    }

    /// Copy of the graph with node `u` and its incident edges removed.
    pub fn without_node(&self, u: usize) -> Result<Graph> {
        let keep: Vec<usize> = (0..self.node_count).filter(|&v| v != u).collect();
        self.induced(&keep)
    }

    /// Relabel nodes: node `i` of the result is node `perm[i]` of `self`.
    pub fn permuted(&self, perm: &[usize]) -> Result<Graph> {
        if perm.len() != self.node_count {
            return Err(Error::Shape("permutation length differs from node count".into()));
        }
        self.induced(perm)
    }
}

/// Square cost matrix paired with a probability measure over its points.
#[derive(Debug, Clone, PartialEq)]
pub struct MetricMeasureSpace {
    cost: Array2<f64>,
    measure: Array1<f64>,
}

const MEASURE_TOL: f64 = 1e-12;

impl MetricMeasureSpace {
    /// Validates symmetry, zero diagonal, nonnegativity and that the measure
    /// is a positive probability vector.
    pub fn new(cost: Array2<f64>, measure: Array1<f64>) -> Result<Self> {
        let n = cost.nrows();
        if n == 0 || cost.ncols() != n || measure.len() != n {
            return Err(Error::Shape(format!(
                "cost {:?} and measure of length {} do not describe a space",
                cost.dim(),
                measure.len()
            )));
        }
        for i in 0..n {
            if cost[[i, i]] != 0.0 {
                return Err(Error::Domain(format!("cost[{i}][{i}] = {} is not zero", cost[[i, i]])));
            }
            for j in 0..i {
                let (a, b) = (cost[[i, j]], cost[[j, i]]);
                if !a.is_finite() || a < 0.0 || a != b {
                    return Err(Error::Domain(format!(
                        "cost[{i}][{j}] = {a}, cost[{j}][{i}] = {b}: must be finite, nonnegative and symmetric"
                    )));
                }
            }
        }
        if measure.iter().any(|&w| !(w > 0.0) || !w.is_finite()) {
            return Err(Error::Domain("measure entries must be positive".into()));
        }
        if (measure.sum() - 1.0).abs() > MEASURE_TOL {
            return Err(Error::Domain(format!("measure sums to {}", measure.sum())));
        }
        Ok(MetricMeasureSpace { cost, measure })
    }

    /// Space with the uniform measure `1/n`.
    pub fn uniform(cost: Array2<f64>) -> Result<Self> {
        let n = cost.nrows();
        MetricMeasureSpace::new(cost, uniform_measure(n))
    }

    pub fn size(&self) -> usize {
        self.measure.len()
    }

    pub fn cost(&self) -> &Array2<f64> {
        &self.cost
    }

    pub fn measure(&self) -> &Array1<f64> {
        &self.measure
    }

    pub fn is_uniform(&self) -> bool {
        let u = 1.0 / self.size() as f64;
        self.measure.iter().all(|&w| (w - u).abs() <= 1e-14)
    }

    /// Space with points relabeled: point `i` of the result is point `perm[i]`.
    pub fn permuted(&self, perm: &[usize]) -> Self {
        let n = self.size();
        let cost = Array2::from_shape_fn((n, n), |(i, j)| self.cost[[perm[i], perm[j]]]);
        let measure = Array1::from_shape_fn(n, |i| self.measure[perm[i]]);
        MetricMeasureSpace { cost, measure }
    }
}

pub fn uniform_measure(n: usize) -> Array1<f64> {
    Array1::from_elem(n, 1.0 / n as f64)
}

/// A named collection of graphs.
#[derive(Debug, Clone)]
pub struct DatasetBundle {
    pub graphs: Vec<Graph>,
    pub name: String,
    /// `1 + max` node label over all labeled graphs, 0 when no graph has labels.
    pub num_node_classes: usize,
}

impl DatasetBundle {
    pub fn new(name: impl Into<String>, graphs: Vec<Graph>) -> Self {
        let num_node_classes = graphs
            .iter()
            .filter_map(|g| g.node_labels())
            .flat_map(|l| l.iter().copied())
            .max()
            .map_or(0, |m| m + 1);
        DatasetBundle {
            graphs,
            name: name.into(),
            num_node_classes,
        }
    }

    pub fn len(&self) -> usize {
        self.graphs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.graphs.is_empty()
    }

    pub fn mean_node_count(&self) -> f64 {
        self.graphs.iter().map(|g| g.node_count() as f64).sum::<f64>() / self.len().max(1) as f64
    }

    /// Graph labels in dataset order; errors if any graph is unlabeled.
    pub fn graph_labels(&self) -> Result<Vec<i64>> {
        self.graphs
            .iter()
            .enumerate()
            .map(|(i, g)| {
                g.graph_label()
                    .ok_or_else(|| Error::Precondition(format!("graph {i} has no graph label")))
            })
            .collect()
    }
}
