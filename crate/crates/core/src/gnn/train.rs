use ndarray::{Array2, Axis};

use super::model::{Architecture, ModelParams};
use crate::error::{Error, Result};
use crate::graph::Graph;
use crate::ldp::EmbeddingMatrix;

/// Full-batch gradient descent settings.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TrainConfig {
    pub epochs: usize,
    pub learning_rate: f64,
    pub seed: u64,
}

impl TrainConfig {
    pub fn new(epochs: usize, learning_rate: f64, seed: u64) -> Result<Self> {
        let cfg = TrainConfig {
            epochs,
            learning_rate,
            seed,
        };
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        if self.epochs == 0 {
            return Err(Error::Parameter("epochs must be at least 1".into()));
        }
        if !(self.learning_rate >= 0.0) || !self.learning_rate.is_finite() {
            return Err(Error::Parameter(format!("learning rate {} must be finite and >= 0", self.learning_rate)));
        }
        Ok(())
    }
}

/// `D^-1/2 (A + I) D^-1/2` with `D` the degree matrix of `A + I`.
pub fn normalized_adjacency(g: &Graph) -> Array2<f64> {
    let n = g.node_count();
    let inv_sqrt: Vec<f64> = (0..n).map(|u| 1.0 / ((g.degree(u) + 1) as f64).sqrt()).collect();
    let mut a = Array2::zeros((n, n));
    for u in 0..n {
        a[[u, u]] = inv_sqrt[u] * inv_sqrt[u];
    }
    for &(u, v) in g.edges() {
        let w = inv_sqrt[u] * inv_sqrt[v];
        a[[u, v]] = w;
        a[[v, u]] = w;
    }
    a
}

/// `(1 + self_weight) I + A`, the GIN neighborhood sum.
fn gin_aggregator(g: &Graph, self_weight: f64) -> Array2<f64> {
    let mut a = g.adjacency();
    for u in 0..g.node_count() {
        a[[u, u]] = 1.0 + self_weight;
    }
    a
}

#[derive(Debug, Clone, Copy)]
enum Op {
    Propagate,
    Linear(usize),
    Relu,
}

fn tape(params: &ModelParams) -> Vec<Op> {
    match params.architecture {
        Architecture::Gcn => vec![Op::Propagate, Op::Linear(0), Op::Relu, Op::Propagate, Op::Linear(1)],
        Architecture::Gin => {
            let depth = params.gin_mlp_depth;
            let mut ops = Vec::new();
            for l in 0..params.gin_layers() {
                ops.push(Op::Propagate);
                for t in 0..depth {
                    ops.push(Op::Linear(l * depth + t));
                    ops.push(Op::Relu);
                }
            }
            ops.push(Op::Linear(params.layers.len() - 1));
            ops
        }
    }
}

fn propagation(g: &Graph, params: &ModelParams) -> Array2<f64> {
    match params.architecture {
        Architecture::Gcn => normalized_adjacency(g),
        Architecture::Gin => gin_aggregator(g, params.gin_self_weight),
    }
}

fn softmax_rows(z: &Array2<f64>) -> Array2<f64> {
    let mut p = z.clone();
    for mut row in p.rows_mut() {
        let max = row.fold(f64::NEG_INFINITY, |m, &x| m.max(x));
        row.mapv_inplace(|x| (x - max).exp());
        let s = row.sum();
        row /= s;
    }
    p
}

/// Result of a forward pass.
#[derive(Debug, Clone)]
pub struct Forward {
    /// Output of every message-passing layer (after its last ReLU).
    pub hidden: Vec<Array2<f64>>,
    pub logits: Array2<f64>,
    pub probs: Array2<f64>,
}

struct Trace {
    /// Input of each tape op.
    inputs: Vec<Array2<f64>>,
    prop: Array2<f64>,
    forward: Forward,
}

fn run(g: &Graph, params: &ModelParams) -> Result<Trace> {
    params.validate()?;
    let x = g.features();
    if x.ncols() != params.in_dim() {
        return Err(Error::Shape(format!(
            "graph has {} input features, model expects {}",
            x.ncols(),
            params.in_dim()
        )));
    }
    let prop = propagation(g, params);
    let ops = tape(params);
    let mut inputs = Vec::with_capacity(ops.len());
    let mut hidden = Vec::new();
    let mut h = x.to_owned();
    for (k, op) in ops.iter().enumerate() {
        let next = match *op {
            Op::Propagate => prop.dot(&h),
            Op::Linear(i) => {
                let l = &params.layers[i];
                h.dot(&l.weight) + &l.bias
            }
            Op::Relu => h.mapv(|v| v.max(0.0)),
        };
        // a ReLU followed by a propagate or by the output head closes a layer
        if matches!(op, Op::Relu) && !matches!(ops.get(k + 1), Some(Op::Linear(j)) if is_inner(params, *j)) {
            hidden.push(next.clone());
        }
        inputs.push(std::mem::replace(&mut h, next));
    }
    let probs = softmax_rows(&h);
    Ok(Trace {
        inputs,
        prop,
        forward: Forward {
            hidden,
            logits: h,
            probs,
        },
    })
}

/// Whether linear layer `j` continues the MLP of the layer before it.
fn is_inner(params: &ModelParams, j: usize) -> bool {
    match params.architecture {
        Architecture::Gcn => false,
        Architecture::Gin => j < params.layers.len() - 1 && !j.is_multiple_of(params.gin_mlp_depth),
    }
}

/// Forward pass. GCN: `softmax(Â relu(Â X W0 + b0) W1 + b1)`. GIN: per layer
/// `h' = MLP((1 + e) h + Σ_neighbors h)` with ReLU MLPs, then a linear head
/// and softmax.
pub fn forward(g: &Graph, params: &ModelParams) -> Result<Forward> {
    run(g, params).map(|t| t.forward)
}

fn cross_entropy(logits: &Array2<f64>, labels: &[usize]) -> f64 {
    let n = logits.nrows() as f64;
    logits
        .rows()
        .into_iter()
        .zip(labels)
        .map(|(row, &y)| {
            let max = row.fold(f64::NEG_INFINITY, |m, &x| m.max(x));
            let lse = max + row.iter().map(|&x| (x - max).exp()).sum::<f64>().ln();
            lse - row[y]
        })
        .sum::<f64>()
        / n
}

/// Mean cross-entropy of the node predictions against the node labels.
pub fn loss(g: &Graph, params: &ModelParams) -> Result<f64> {
    let labels = super::check_labels(g, params.out_dim())?;
    let f = forward(g, params)?;
    Ok(cross_entropy(&f.logits, labels))
}

/// Loss and its gradient with respect to every layer's weight and bias, by
/// backpropagation through the tape.
pub fn gradients(g: &Graph, params: &ModelParams) -> Result<(f64, ModelParams)> {
    let labels = super::check_labels(g, params.out_dim())?;
    let trace = run(g, params)?;
    let n = g.node_count() as f64;
    let value = cross_entropy(&trace.forward.logits, labels);

    let mut delta = trace.forward.probs.clone();
    for (i, &y) in labels.iter().enumerate() {
        delta[[i, y]] -= 1.0;
    }
    delta /= n;

    let mut grads = params.clone();
    let ops = tape(params);
    for (k, op) in ops.iter().enumerate().rev() {
        let input = &trace.inputs[k];
        delta = match *op {
            Op::Propagate => trace.prop.t().dot(&delta),
            Op::Linear(i) => {
                let l = &mut grads.layers[i];
                l.weight = input.t().dot(&delta);
                l.bias = delta.sum_axis(Axis(0));
                delta.dot(&params.layers[i].weight.t())
            }
            Op::Relu => {
                let mut d = delta;
                d.zip_mut_with(input, |d, &x| {
                    if x <= 0.0 {
                        *d = 0.0
                    }
                });
                d
            }
        };
    }
    Ok((value, grads))
}

fn step(params: &mut ModelParams, grads: &ModelParams, lr: f64) {
    for (l, gl) in params.layers.iter_mut().zip(&grads.layers) {
        l.weight.scaled_add(-lr, &gl.weight);
        l.bias.scaled_add(-lr, &gl.bias);
    }
}

/// `cfg.epochs` steps of full-batch gradient descent, returning the updated
/// model and the loss observed before each step.
pub fn train_local_traced(g: &Graph, params: &ModelParams, cfg: &TrainConfig) -> Result<(ModelParams, Vec<f64>)> {
    cfg.validate()?;
    let mut current = params.clone();
    let mut losses = Vec::with_capacity(cfg.epochs);
    for _ in 0..cfg.epochs {
        let (value, grads) = gradients(g, &current)?;
        if !value.is_finite() {
            return Err(Error::Numeric(format!("training loss became {value}")));
        }
        losses.push(value);
        if cfg.learning_rate != 0.0 {
            step(&mut current, &grads, cfg.learning_rate);
        }
    }
    Ok((current, losses))
}

pub fn train_local(g: &Graph, params: &ModelParams, cfg: &TrainConfig) -> Result<ModelParams> {
    train_local_traced(g, params, cfg).map(|(p, _)| p)
}

/// Post-softmax node embedding with bounds `[0, 1]`.
pub fn extract_embedding(g: &Graph, params: &ModelParams) -> Result<EmbeddingMatrix> {
    let probs = forward(g, params)?.probs;
    // rounding can push a probability a hair outside [0, 1]
    EmbeddingMatrix::new(probs.mapv(|p| p.clamp(0.0, 1.0)), 0.0, 1.0)
}
