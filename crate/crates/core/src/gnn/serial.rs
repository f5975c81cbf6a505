//! Plain-text snapshot format for model parameters.
//!
//! ```text
//! fedgw-params 1
//! architecture gin
//! hidden_dim 8
//! gin_mlp_depth 2
//! gin_self_weight 0
//! layers 5
//! weight 0 7 8
//! <row-major values, space separated>
//! bias 0 8
//! <values>
//! ...
//! ```
//!
//! Values are written with Rust's shortest round-trip float formatting, so a
//! snapshot reloads bit-identically.

use std::fmt::Write as _;

use ndarray::{Array1, Array2};

use super::model::{Architecture, Dense, ModelParams};
use crate::error::{Error, Result};

const MAGIC: &str = "fedgw-params 1";

pub fn params_to_text(p: &ModelParams) -> String {
    let mut s = String::new();
    let arch = match p.architecture {
        Architecture::Gcn => "gcn",
        Architecture::Gin => "gin",
    };
    writeln!(s, "{MAGIC}").unwrap();
    writeln!(s, "architecture {arch}").unwrap();
    writeln!(s, "hidden_dim {}", p.hidden_dim).unwrap();
    writeln!(s, "gin_mlp_depth {}", p.gin_mlp_depth).unwrap();
    writeln!(s, "gin_self_weight {}", p.gin_self_weight).unwrap();
    writeln!(s, "layers {}", p.layers.len()).unwrap();
    let join = |it: &mut dyn Iterator<Item = &f64>| it.map(f64::to_string).collect::<Vec<_>>().join(" ");
    for (i, l) in p.layers.iter().enumerate() {
        writeln!(s, "weight {i} {} {}", l.weight.nrows(), l.weight.ncols()).unwrap();
        writeln!(s, "{}", join(&mut l.weight.iter())).unwrap();
        writeln!(s, "bias {i} {}", l.bias.len()).unwrap();
        writeln!(s, "{}", join(&mut l.bias.iter())).unwrap();
    }
    s
}

struct Reader<'a> {
    lines: std::iter::Enumerate<std::str::Lines<'a>>,
}

impl<'a> Reader<'a> {
    fn next(&mut self) -> Result<(usize, &'a str)> {
        self.lines
            .next()
            .map(|(i, l)| (i + 1, l.trim()))
            .ok_or_else(|| Error::format("params", 0, "unexpected end of snapshot"))
    }

    fn keyed(&mut self, key: &str) -> Result<(usize, Vec<&'a str>)> {
        let (line, text) = self.next()?;
        let mut parts = text.split_whitespace();
        if parts.next() != Some(key) {
            return Err(Error::format("params", line, format!("expected {key:?}")));
        }
        Ok((line, parts.collect()))
    }

    fn values(&mut self, count: usize) -> Result<Vec<f64>> {
        let (line, text) = self.next()?;
        let v: Vec<f64> = text
            .split_whitespace()
            .map(|t| t.parse().map_err(|_| Error::format("params", line, format!("bad real {t:?}"))))
            .collect::<Result<_>>()?;
        if v.len() != count {
            return Err(Error::format("params", line, format!("expected {count} values, found {}", v.len())));
        }
        Ok(v)
    }
}

fn num<T: std::str::FromStr>(line: usize, parts: &[&str], i: usize) -> Result<T> {
    parts
        .get(i)
        .and_then(|t| t.parse().ok())
        .ok_or_else(|| Error::format("params", line, "missing or malformed field"))
}

pub fn params_from_text(text: &str) -> Result<ModelParams> {
    let mut r = Reader {
        lines: text.lines().enumerate(),
    };
    let (line, head) = r.next()?;
    if head != MAGIC {
        return Err(Error::format("params", line, "not a parameter snapshot"));
    }
    let (line, a) = r.keyed("architecture")?;
    let architecture = match a.first().copied() {
        Some("gcn") => Architecture::Gcn,
        Some("gin") => Architecture::Gin,
        _ => return Err(Error::format("params", line, "unknown architecture")),
    };
    let (line, v) = r.keyed("hidden_dim")?;
    let hidden_dim = num(line, &v, 0)?;
    let (line, v) = r.keyed("gin_mlp_depth")?;
    let gin_mlp_depth = num(line, &v, 0)?;
    let (line, v) = r.keyed("gin_self_weight")?;
    let gin_self_weight = num(line, &v, 0)?;
    let (line, v) = r.keyed("layers")?;
    let count: usize = num(line, &v, 0)?;
    let mut layers = Vec::with_capacity(count);
    for _ in 0..count {
        let (line, v) = r.keyed("weight")?;
        let (rows, cols): (usize, usize) = (num(line, &v, 1)?, num(line, &v, 2)?);
        let weight = Array2::from_shape_vec((rows, cols), r.values(rows * cols)?)
            .map_err(|e| Error::Shape(e.to_string()))?;
        let (line, v) = r.keyed("bias")?;
        let len: usize = num(line, &v, 1)?;
        let bias = Array1::from(r.values(len)?);
        layers.push(Dense { weight, bias });
    }
    let params = ModelParams {
        architecture,
        layers,
        hidden_dim,
        gin_mlp_depth,
        gin_self_weight,
    };
    params.validate()?;
    Ok(params)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn snapshot_reloads_bit_identically() {
        for p in [ModelParams::gcn(4, 3, 2, 8), ModelParams::gin(3, 5, 4, 2, 2, 1)] {
            let text = params_to_text(&p);
            assert_eq!(params_from_text(&text).unwrap(), p);
        }
    }

    #[test]
    fn truncated_snapshot_fails() {
        let text = params_to_text(&ModelParams::gcn(2, 2, 2, 0));
        let cut: String = text.lines().take(8).collect::<Vec<_>>().join("\n");
        assert!(params_from_text(&cut).is_err());
        assert!(params_from_text("hello").is_err());
    }
}
