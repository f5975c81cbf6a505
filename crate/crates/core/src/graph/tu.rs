//! Reader and writer for the TU benchmark text format.
//!
//! Files are 1-indexed; conversion to 0-indexed local ids happens here and
//! nowhere else.

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use ndarray::Array2;

use super::{DatasetBundle, Graph};
use crate::error::{Error, Result};

fn read_required(path: PathBuf) -> Result<String> {
    fs::read_to_string(&path).map_err(|source| Error::Load { path, source })
}

fn read_optional(path: PathBuf) -> Result<Option<String>> {
    match fs::read_to_string(&path) {
        Ok(s) => Ok(Some(s)),
        Err(e) if e.kind() == std::io::ErrorKind::NotFound => Ok(None),
        Err(source) => Err(Error::Load { path, source }),
    }
}

/// Non-empty lines with their 1-based line numbers.
fn lines(text: &str) -> impl Iterator<Item = (usize, &str)> {
    text.lines()
        .enumerate()
        .map(|(i, l)| (i + 1, l.trim()))
        .filter(|(_, l)| !l.is_empty())
}

fn parse_int<T: std::str::FromStr>(file: &str, line: usize, token: &str) -> Result<T> {
    token
        .trim()
        .parse()
        .map_err(|_| Error::format(file, line, format!("expected an integer, found {token:?}")))
}

/// Load `{name}_*.txt` files from `directory` into a bundle.
pub fn load_tu_dataset(directory: impl AsRef<Path>, name: &str) -> Result<DatasetBundle> {
    let dir = directory.as_ref();
    let file = |suffix: &str| dir.join(format!("{name}_{suffix}.txt"));
    let a_name = format!("{name}_A.txt");
    let ind_name = format!("{name}_graph_indicator.txt");
    let gl_name = format!("{name}_graph_labels.txt");
    let nl_name = format!("{name}_node_labels.txt");
    let na_name = format!("{name}_node_attributes.txt");

    let adjacency = read_required(file("A"))?;
    let indicator = read_required(file("graph_indicator"))?;
    let graph_labels = read_required(file("graph_labels"))?;
    let node_labels = read_optional(file("node_labels"))?;
    let node_attrs = read_optional(file("node_attributes"))?;

    // global node (0-based) -> (graph index, local id)
    let mut owner = Vec::new();
    let mut sizes: Vec<usize> = Vec::new();
    for (line, tok) in lines(&indicator) {
        let gid: usize = parse_int(&ind_name, line, tok)?;
        if gid == 0 {
            return Err(Error::format(&ind_name, line, "graph ids are 1-indexed"));
        }
        let g = gid - 1;
        if g >= sizes.len() {
            sizes.resize(g + 1, 0);
        }
        owner.push((g, sizes[g]));
        sizes[g] += 1;
    }
    if let Some(g) = sizes.iter().position(|&s| s == 0) {
        return Err(Error::format(&ind_name, 0, format!("graph {} has no nodes", g + 1)));
    }

    let labels: Vec<i64> = lines(&graph_labels)
        .map(|(line, tok)| parse_int(&gl_name, line, tok))
        .collect::<Result<_>>()?;
    if labels.len() != sizes.len() {
        return Err(Error::format(
            &gl_name,
            labels.len(),
            format!("{} graph labels for {} graphs", labels.len(), sizes.len()),
        ));
    }

    let mut edges: Vec<Vec<(usize, usize)>> = vec![Vec::new(); sizes.len()];
    for (line, row) in lines(&adjacency) {
        let mut parts = row.split(',');
        let (Some(a), Some(b), None) = (parts.next(), parts.next(), parts.next()) else {
            return Err(Error::format(&a_name, line, "expected \"i, j\""));
        };
        let a: usize = parse_int(&a_name, line, a)?;
        let b: usize = parse_int(&a_name, line, b)?;
        if a == 0 || b == 0 || a > owner.len() || b > owner.len() {
            return Err(Error::format(&a_name, line, format!("node id out of range 1..={}", owner.len())));
        }
        let (ga, la) = owner[a - 1];
        let (gb, lb) = owner[b - 1];
        if ga != gb {
            return Err(Error::format(
                &a_name,
                line,
                format!("edge ({a}, {b}) connects graphs {} and {}", ga + 1, gb + 1),
            ));
        }
        if la != lb {
            edges[ga].push((la, lb));
        }
    }

    let node_label_values: Option<Vec<usize>> = node_labels
        .map(|text| {
            let v: Vec<usize> = lines(&text)
                .map(|(line, tok)| parse_int(&nl_name, line, tok))
                .collect::<Result<_>>()?;
            if v.len() != owner.len() {
                return Err(Error::format(
                    &nl_name,
                    v.len(),
                    format!("{} node labels for {} nodes", v.len(), owner.len()),
                ));
            }
            Ok(v)
        })
        .transpose()?;

    let attributes: Option<(usize, Vec<f64>)> = node_attrs
        .map(|text| {
            let mut width = None;
            let mut values = Vec::new();
            let mut rows = 0;
            for (line, row) in lines(&text) {
                let parsed: Vec<f64> = row
                    .split(',')
                    .map(|t| {
                        t.trim()
                            .parse()
                            .map_err(|_| Error::format(&na_name, line, format!("bad real {t:?}")))
                    })
                    .collect::<Result<_>>()?;
                match width {
                    None => width = Some(parsed.len()),
                    Some(w) if w != parsed.len() => {
                        return Err(Error::format(&na_name, line, format!("expected {w} values")))
                    }
                    _ => {}
                }
                values.extend(parsed);
                rows += 1;
            }
            if rows != owner.len() {
                return Err(Error::format(
                    &na_name,
                    rows,
                    format!("{rows} attribute rows for {} nodes", owner.len()),
                ));
            }
            Ok((width.unwrap_or(0), values))
        })
        .transpose()?;

    let mut members: Vec<Vec<usize>> = vec![Vec::new(); sizes.len()];
    for (global, &(g, _)) in owner.iter().enumerate() {
        members[g].push(global);
    }

    let mut graphs = Vec::with_capacity(sizes.len());
    for (g, nodes) in members.iter().enumerate() {
        let mut graph = Graph::new(sizes[g], edges[g].iter().copied())?.with_graph_label(labels[g]);
        if let Some(all) = &node_label_values {
            graph = graph.with_node_labels(nodes.iter().map(|&u| all[u]).collect())?;
        }
        if let Some((width, values)) = &attributes {
            let x = Array2::from_shape_fn((nodes.len(), *width), |(i, k)| values[nodes[i] * width + k]);
            graph = graph.with_features(x)?;
        }
        graphs.push(graph);
    }
    Ok(DatasetBundle::new(name, graphs))
}

/// Write a bundle in the same text format. Each undirected edge is written in
/// both orientations, as the public TU files do.
pub fn write_tu_dataset(bundle: &DatasetBundle, directory: impl AsRef<Path>, name: &str) -> Result<()> {
    let dir = directory.as_ref();
    fs::create_dir_all(dir)?;
    let mut a = String::new();
    let mut ind = String::new();
    let mut gl = String::new();
    let mut nl = String::new();
    let mut na = String::new();
    let with_labels = bundle.graphs.iter().all(|g| g.node_labels().is_some());
    let with_attrs = bundle.graphs.iter().all(|g| g.features().ncols() > 0);
    let mut offset = 0;
    for (gi, g) in bundle.graphs.iter().enumerate() {
        for _ in 0..g.node_count() {
            writeln!(ind, "{}", gi + 1).unwrap();
        }
        let label = g
            .graph_label()
            .ok_or_else(|| Error::Precondition(format!("graph {gi} has no graph label")))?;
        writeln!(gl, "{label}").unwrap();
        for &(u, v) in g.edges() {
            writeln!(a, "{}, {}", offset + u + 1, offset + v + 1).unwrap();
            writeln!(a, "{}, {}", offset + v + 1, offset + u + 1).unwrap();
        }
        if with_labels {
            for l in g.node_labels().unwrap() {
                writeln!(nl, "{l}").unwrap();
            }
        }
        if with_attrs {
            for row in g.features().rows() {
                let cells: Vec<String> = row.iter().map(|x| x.to_string()).collect();
                writeln!(na, "{}", cells.join(", ")).unwrap();
            }
        }
        offset += g.node_count();
    }
    fs::write(dir.join(format!("{name}_A.txt")), a)?;
    fs::write(dir.join(format!("{name}_graph_indicator.txt")), ind)?;
    fs::write(dir.join(format!("{name}_graph_labels.txt")), gl)?;
    if with_labels {
        fs::write(dir.join(format!("{name}_node_labels.txt")), nl)?;
    }
    if with_attrs {
        fs::write(dir.join(format!("{name}_node_attributes.txt")), na)?;
    }
    Ok(())
}
