use ndarray::{Array1, Array2};
use rand::Rng as _;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::rng::rng;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Architecture {
    Gcn,
    Gin,
}

/// Shape of a model, without weights.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default)]
pub struct ModelSpec {
    pub architecture: Architecture,
    pub hidden_dim: usize,
    /// Message-passing layers (GIN only).
    pub gin_layers: usize,
    /// Linear maps per GIN layer.
    pub gin_mlp_depth: usize,
}

impl Default for ModelSpec {
    fn default() -> Self {
        ModelSpec {
            architecture: Architecture::Gin,
            hidden_dim: 16,
            gin_layers: 2,
            gin_mlp_depth: 2,
        }
    }
}

impl ModelSpec {
    pub fn validate(&self) -> Result<()> {
        if self.hidden_dim == 0 {
            return Err(Error::Parameter("hidden_dim must be at least 1".into()));
        }
        if self.architecture == Architecture::Gin && (self.gin_layers == 0 || self.gin_mlp_depth == 0) {
            return Err(Error::Parameter("GIN needs at least one layer of depth at least one".into()));
        }
        Ok(())
    }

    /// Freshly initialized weights for `in_dim` inputs and `classes` outputs.
    pub fn build(&self, in_dim: usize, classes: usize, seed: u64) -> Result<ModelParams> {
        self.validate()?;
        if in_dim == 0 || classes == 0 {
            return Err(Error::Shape(format!("model needs inputs and outputs, got {in_dim} -> {classes}")));
        }
        Ok(match self.architecture {
            Architecture::Gcn => ModelParams::gcn(in_dim, self.hidden_dim, classes, seed),
            Architecture::Gin => {
                ModelParams::gin(in_dim, self.hidden_dim, classes, self.gin_layers, self.gin_mlp_depth, seed)
            }
        })
    }
}

/// Affine layer `x W + b`.
#[derive(Debug, Clone, PartialEq)]
pub struct Dense {
    pub weight: Array2<f64>,
    pub bias: Array1<f64>,
}

impl Dense {
    /// Glorot-uniform weights in `[-s, s]`, `s = sqrt(6 / (fan_in + fan_out))`, zero bias.
    pub fn glorot(fan_in: usize, fan_out: usize, r: &mut crate::rng::Rng) -> Self {
        let s = (6.0 / (fan_in + fan_out) as f64).sqrt();
        Dense {
            weight: Array2::from_shape_simple_fn((fan_in, fan_out), || r.random_range(-s..=s)),
            bias: Array1::zeros(fan_out),
        }
    }

    pub fn in_dim(&self) -> usize {
        self.weight.nrows()
    }

    pub fn out_dim(&self) -> usize {
        self.weight.ncols()
    }
}

/// Weights shared between the server and the clients.
///
/// GCN: two layers. GIN: `gin_layers()` message-passing layers of
/// `gin_mlp_depth` linear maps each, followed by a linear output head.
#[derive(Debug, Clone, PartialEq)]
pub struct ModelParams {
    pub architecture: Architecture,
    pub layers: Vec<Dense>,
    pub hidden_dim: usize,
    pub gin_mlp_depth: usize,
    pub gin_self_weight: f64,
}

impl ModelParams {
    pub fn gcn(in_dim: usize, hidden_dim: usize, classes: usize, seed: u64) -> Self {
        let mut r = rng(seed);
        ModelParams {
            architecture: Architecture::Gcn,
            layers: vec![
                Dense::glorot(in_dim, hidden_dim, &mut r),
                Dense::glorot(hidden_dim, classes, &mut r),
            ],
            hidden_dim,
            gin_mlp_depth: 0,
            gin_self_weight: 0.0,
        }
    }

    pub fn gin(
        in_dim: usize,
        hidden_dim: usize,
        classes: usize,
        gin_layers: usize,
        mlp_depth: usize,
        seed: u64,
    ) -> Self {
        let mut r = rng(seed);
        let mut layers = Vec::with_capacity(gin_layers * mlp_depth + 1);
        let mut width = in_dim;
        for _ in 0..gin_layers {
            for _ in 0..mlp_depth {
                layers.push(Dense::glorot(width, hidden_dim, &mut r));
                width = hidden_dim;
            }
        }
        layers.push(Dense::glorot(width, classes, &mut r));
        ModelParams {
            architecture: Architecture::Gin,
            layers,
            hidden_dim,
            gin_mlp_depth: mlp_depth,
            gin_self_weight: 0.0,
        }
    }

    pub fn in_dim(&self) -> usize {
        self.layers[0].in_dim()
    }

    pub fn out_dim(&self) -> usize {
        self.layers.last().unwrap().out_dim()
    }

    pub fn gin_layers(&self) -> usize {
        match self.architecture {
            Architecture::Gcn => 0,
            Architecture::Gin => (self.layers.len() - 1) / self.gin_mlp_depth.max(1),
        }
    }

    /// Check that layer shapes chain and match the architecture.
    pub fn validate(&self) -> Result<()> {
        if self.layers.is_empty() {
            return Err(Error::Shape("model has no layers".into()));
        }
        match self.architecture {
            Architecture::Gcn if self.layers.len() != 2 => {
                return Err(Error::Shape(format!("GCN needs 2 layers, found {}", self.layers.len())))
            }
            Architecture::Gin
                if self.gin_mlp_depth == 0 || !(self.layers.len() - 1).is_multiple_of(self.gin_mlp_depth) =>
            {
                return Err(Error::Shape(format!(
                    "{} layers do not split into MLPs of depth {} plus a head",
                    self.layers.len(),
                    self.gin_mlp_depth
                )))
            }
            _ => {}
        }
        for (i, l) in self.layers.iter().enumerate() {
            if l.bias.len() != l.out_dim() {
                return Err(Error::Shape(format!("layer {i} bias length {} != {}", l.bias.len(), l.out_dim())));
            }
            if i > 0 && self.layers[i - 1].out_dim() != l.in_dim() {
                return Err(Error::Shape(format!(
                    "layer {} outputs {} but layer {i} expects {}",
                    i - 1,
                    self.layers[i - 1].out_dim(),
                    l.in_dim()
                )));
            }
        }
        Ok(())
    }

    /// True when both models have the same architecture and layer shapes.
    pub fn same_shape(&self, other: &ModelParams) -> bool {
        self.architecture == other.architecture
            && self.gin_mlp_depth == other.gin_mlp_depth
            && self.gin_self_weight == other.gin_self_weight
            && self.layers.len() == other.layers.len()
            && self
                .layers
                .iter()
                .zip(&other.layers)
                .all(|(a, b)| a.weight.dim() == b.weight.dim() && a.bias.len() == b.bias.len())
    }

    pub fn num_parameters(&self) -> usize {
        self.layers.iter().map(|l| l.weight.len() + l.bias.len()).sum()
    }

    /// All weights then biases of each layer, in layer order.
    pub fn flatten(&self) -> Vec<f64> {
        let mut out = Vec::with_capacity(self.num_parameters());
        for l in &self.layers {
            out.extend(l.weight.iter());
            out.extend(l.bias.iter());
        }
        out
    }

    /// Inverse of [`flatten`](Self::flatten) onto this model's shapes.
    pub fn with_flat(&self, values: &[f64]) -> Result<Self> {
        if values.len() != self.num_parameters() {
            return Err(Error::Shape(format!(
                "{} values for {} parameters",
                values.len(),
                self.num_parameters()
            )));
        }
        let mut out = self.clone();
        let mut it = values.iter();
        for l in &mut out.layers {
            l.weight.iter_mut().chain(l.bias.iter_mut()).for_each(|w| *w = *it.next().unwrap());
        }
        Ok(out)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn glorot_bounds_and_determinism() {
        let m = ModelParams::gcn(5, 16, 3, 1);
        let s = (6.0f64 / 21.0).sqrt();
        assert!(m.layers[0].weight.iter().all(|w| w.abs() <= s));
        assert_eq!(m, ModelParams::gcn(5, 16, 3, 1));
        assert_ne!(m, ModelParams::gcn(5, 16, 3, 2));
        m.validate().unwrap();
    }

    #[test]
    fn gin_layout() {
        let m = ModelParams::gin(7, 8, 7, 2, 2, 0);
        assert_eq!(m.layers.len(), 5);
        assert_eq!(m.gin_layers(), 2);
        assert_eq!(m.out_dim(), 7);
        m.validate().unwrap();
    }

    #[test]
    fn broken_chain_is_rejected() {
        let mut m = ModelParams::gcn(3, 4, 2, 0);
        m.layers[1].weight = Array2::zeros((5, 2));
        assert!(matches!(m.validate(), Err(Error::Shape(_))));
    }

    #[test]
    fn flat_roundtrip() {
        let m = ModelParams::gin(3, 4, 2, 1, 2, 9);
        let flat = m.flatten();
        assert_eq!(m.with_flat(&flat).unwrap(), m);
        assert!(m.with_flat(&flat[1..]).is_err());
    }
}
