use std::fs;
use std::path::Path;

use ndarray::Array2;

use super::Graph;
use crate::error::{Error, Result};

fn read(path: &Path) -> Result<String> {
    fs::read_to_string(path).map_err(|source| Error::Load {
        path: path.to_path_buf(),
        source,
    })
}

fn display(path: &Path) -> String {
    path.display().to_string()
}

/// Load a single graph from a whitespace-separated `u v` edge file with
/// optional comma-separated feature rows and one-integer-per-line labels.
///
/// The node count is one past the largest node id referenced by any file.
pub fn load_edge_list_graph(
    edges_path: impl AsRef<Path>,
    features_path: Option<&Path>,
    labels_path: Option<&Path>,
) -> Result<Graph> {
    let edges_path = edges_path.as_ref();
    let name = display(edges_path);
    let mut edges = Vec::new();
    let mut n = 0;
    for (i, line) in read(edges_path)?.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let ids: Vec<&str> = line.split_whitespace().collect();
        if ids.len() != 2 {
            return Err(Error::format(&name, i + 1, "expected \"u v\""));
        }
        let parse = |t: &str| {
            t.parse::<usize>()
                .map_err(|_| Error::format(&name, i + 1, format!("bad node id {t:?}")))
        };
        let (u, v) = (parse(ids[0])?, parse(ids[1])?);
        n = n.max(u + 1).max(v + 1);
        if u != v {
            edges.push((u, v));
        }
    }

    let features = match features_path {
        Some(p) => {
            let fname = display(p);
            let mut rows: Vec<Vec<f64>> = Vec::new();
            for (i, line) in read(p)?.lines().enumerate() {
                if line.trim().is_empty() {
                    continue;
                }
                let row = line
                    .split(',')
                    .map(|t| {
                        t.trim()
                            .parse::<f64>()
                            .map_err(|_| Error::format(&fname, i + 1, format!("bad real {t:?}")))
                    })
                    .collect::<Result<Vec<_>>>()?;
                if let Some(first) = rows.first() {
                    if first.len() != row.len() {
                        return Err(Error::format(
                            &fname,
                            i + 1,
                            format!("ragged row: {} values, expected {}", row.len(), first.len()),
                        ));
                    }
                }
                rows.push(row);
            }
            Some(rows)
        }
        None => None,
    };

    let labels = match labels_path {
        Some(p) => {
            let lname = display(p);
            let mut v = Vec::new();
            for (i, line) in read(p)?.lines().enumerate() {
                let t = line.trim();
                if t.is_empty() {
                    continue;
                }
                v.push(
                    t.parse::<usize>()
                        .map_err(|_| Error::format(&lname, i + 1, format!("bad label {t:?}")))?,
                );
            }
            Some((lname, v))
        }
        None => None,
    };

    if let Some(rows) = &features {
        n = n.max(rows.len());
    }
    if let Some((_, l)) = &labels {
        n = n.max(l.len());
    }
    let mut graph = Graph::new(n, edges)?;
    if let Some(rows) = features {
        let fname = display(features_path.unwrap());
        if !rows.is_empty() && rows.len() != n {
            return Err(Error::format(&fname, rows.len(), format!("{} feature rows for {n} nodes", rows.len())));
        }
        let width = rows.first().map_or(0, Vec::len);
        let x = Array2::from_shape_fn((n, width), |(i, k)| rows[i][k]);
        graph = graph.with_features(x)?;
    }
    if let Some((lname, l)) = labels {
        if l.len() != n {
            return Err(Error::format(lname, l.len(), format!("{} labels for {n} nodes", l.len())));
        }
        graph = graph.with_node_labels(l)?;
    }
    Ok(graph)
}
