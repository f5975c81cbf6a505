use super::check_same_shape;
use crate::error::{Error, Result};
use crate::gnn::ModelParams;

/// Coordinate-wise weighted mean of client parameters, with weights
/// normalized to sum to one.
pub fn fedavg(params: &[ModelParams], weights: &[f64]) -> Result<ModelParams> {
    check_same_shape(params)?;
    if weights.len() != params.len() {
        return Err(Error::Aggregation(format!(
            "{} weights for {} clients",
            weights.len(),
            params.len()
        )));
    }
    if weights.iter().any(|&w| !(w >= 0.0) || !w.is_finite()) {
        return Err(Error::Aggregation("aggregation weights must be finite and nonnegative".into()));
    }
    let total: f64 = weights.iter().sum();
    if total <= 0.0 {
        return Err(Error::Aggregation("aggregation weights are all zero".into()));
    }
    let mut out = params[0].clone();
    for layer in &mut out.layers {
        layer.weight.fill(0.0);
        layer.bias.fill(0.0);
    }
    for (p, &w) in params.iter().zip(weights) {
        let share = w / total;
        for (acc, l) in out.layers.iter_mut().zip(&p.layers) {
            acc.weight.scaled_add(share, &l.weight);
            acc.bias.scaled_add(share, &l.bias);
        }
    }
    Ok(out)
}
