use crate::error::{Error, Result};
use crate::graph::Graph;

pub const DEFAULT_GED_CAP: usize = 8;

struct Padded {
    adjacency: Vec<Vec<bool>>,
    /// `None` for padding, `Some(label)` for a real node.
    nodes: Vec<Option<Option<usize>>>,
}

fn pad(g: &Graph, size: usize) -> Padded {
    let n = g.node_count();
    let mut adjacency = vec![vec![false; size]; size];
    for &(u, v) in g.edges() {
        adjacency[u][v] = true;
        adjacency[v][u] = true;
    }
    let nodes = (0..size)
        .map(|i| (i < n).then(|| g.node_labels().map(|l| l[i])))
        .collect();
    Padded { adjacency, nodes }
}

fn cost(a: &Padded, b: &Padded, perm: &[usize], best: usize) -> usize {
    let mut total = 0;
    for (i, &pi) in perm.iter().enumerate() {
        total += match (a.nodes[i], b.nodes[pi]) {
            (Some(x), Some(y)) => usize::from(x != y),
            (None, None) => 0,
            _ => 1,
        };
    }
    for i in 0..perm.len() {
        if total >= best {
            return total;
        }
        for j in i + 1..perm.len() {
            total += usize::from(a.adjacency[i][j] != b.adjacency[perm[i]][perm[j]]);
        }
    }
    total
}

/// Exact graph edit distance with unit costs for node and edge insertion,
/// deletion and relabeling, by enumerating every node mapping.
///
/// The smaller graph is padded with isolated dummy nodes. Matching a node
/// never costs more than deleting it and inserting its partner, so mappings
/// of the padded vertex sets cover the optimum.
pub fn ged_bruteforce(g1: &Graph, g2: &Graph, max_nodes: usize) -> Result<usize> {
    let size = g1.node_count().max(g2.node_count());
    if size > max_nodes {
        return Err(Error::SizeCap {
            nodes: size,
            cap: max_nodes,
        });
    }
    let (a, b) = (pad(g1, size), pad(g2, size));
    let mut perm: Vec<usize> = (0..size).collect();
    let mut best = cost(&a, &b, &perm, usize::MAX);
    // Heap's algorithm
    let mut c = vec![0usize; size];
    let mut i = 0;
    while i < size && best > 0 {
        if c[i] < i {
            if i % 2 == 0 {
                perm.swap(0, i);
            } else {
                perm.swap(c[i], i);
            }
            best = best.min(cost(&a, &b, &perm, best));
            c[i] += 1;
            i = 0;
        } else {
            c[i] = 0;
            i += 1;
        }
    }
    Ok(best)
}
