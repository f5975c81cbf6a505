//! Dense GCN and GIN node classifiers.
//!
//! Both architectures are expressed as a short tape of operations
//! (propagate, linear, ReLU) ending in a row-softmax, which lets forward and
//! backward passes share one implementation.

mod model;
mod serial;
mod train;

pub use model::{Architecture, Dense, ModelParams, ModelSpec};
pub use serial::{params_from_text, params_to_text};
pub use train::{
    extract_embedding, forward, gradients, loss, normalized_adjacency, train_local, train_local_traced,
    Forward, TrainConfig,
};

use ndarray::Array2;

use crate::error::{Error, Result};
use crate::graph::Graph;

/// How node inputs are built for a graph.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum InputEncoding {
    /// Use the stored feature matrix as is.
    Features,
    /// One-hot node labels over the given number of classes.
    OneHotLabels(usize),
    /// One-hot degree, capped at the given maximum.
    OneHotDegree(usize),
}

impl InputEncoding {
    pub fn width(&self, g: &Graph) -> usize {
        match *self {
            InputEncoding::Features => g.features().ncols(),
            InputEncoding::OneHotLabels(d) => d,
            InputEncoding::OneHotDegree(max) => max + 1,
        }
    }

    /// Pick stored features when present, else one-hot labels, else degrees.
    pub fn infer(g: &Graph, num_node_classes: usize, max_degree: usize) -> Self {
        if g.features().ncols() > 0 {
            InputEncoding::Features
        } else if g.node_labels().is_some() && num_node_classes > 0 {
            InputEncoding::OneHotLabels(num_node_classes)
        } else {
            InputEncoding::OneHotDegree(max_degree)
        }
    }
}

/// Copy of `g` whose feature matrix is the chosen input encoding.
pub fn with_inputs(g: &Graph, encoding: InputEncoding) -> Result<Graph> {
    let x: Array2<f64> = match encoding {
        InputEncoding::Features => return Ok(g.clone()),
        InputEncoding::OneHotLabels(d) => g.one_hot_labels(d)?,
        InputEncoding::OneHotDegree(max) => g.one_hot_degree(max),
    };
    g.clone().with_features(x)
}

pub(crate) fn check_labels(g: &Graph, classes: usize) -> Result<&[usize]> {
    let labels = g
        .node_labels()
        .ok_or_else(|| Error::Precondition("training needs node labels".into()))?;
    if let Some(&bad) = labels.iter().find(|&&l| l >= classes) {
        return Err(Error::Domain(format!("node label {bad} not below {classes} output classes")));
    }
    Ok(labels)
}
