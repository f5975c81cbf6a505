use std::collections::VecDeque;

use super::Graph;
use crate::error::{Error, Result};

/// Induced subgraph on every node within `k` hops of `center`.
///
/// Nodes are numbered in BFS discovery order with neighbors visited in
/// ascending id, so `center` becomes local node 0. The pseudo-label is the
/// center's node label.
pub fn khop_subgraph(g: &Graph, center: usize, k: usize) -> Result<(Graph, usize)> {
    if center >= g.node_count() {
        return Err(Error::Precondition(format!(
            "center {center} outside a graph of {} nodes",
            g.node_count()
        )));
    }
    if k == 0 {
        return Err(Error::Parameter("hop count must be at least 1".into()));
    }
    let labels = g
        .node_labels()
        .ok_or_else(|| Error::Precondition("k-hop split needs node labels".into()))?;
    let mut depth = vec![usize::MAX; g.node_count()];
    let mut order = vec![center];
    let mut queue = VecDeque::from([center]);
    depth[center] = 0;
    while let Some(u) = queue.pop_front() {
        if depth[u] == k {
            continue;
        }
        for &v in g.neighbors(u) {
            if depth[v] == usize::MAX {
                depth[v] = depth[u] + 1;
                order.push(v);
                queue.push_back(v);
            }
        }
    }
    let pseudo = labels[center];
    let sub = g.induced(&order)?.with_graph_label(pseudo as i64);
    Ok((sub, pseudo))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn labeled(n: usize, edges: &[(usize, usize)]) -> Graph {
        Graph::new(n, edges.iter().copied())
            .unwrap()
            .with_node_labels((0..n).collect())
            .unwrap()
    }

    #[test]
    fn star_one_hop_is_whole_star() {
        let g = labeled(4, &[(0, 1), (0, 2), (0, 3)]);
        let (s, label) = khop_subgraph(&g, 0, 1).unwrap();
        assert_eq!(s.node_count(), 4);
        assert_eq!(s.edge_count(), 3);
        assert_eq!(label, 0);
    }

    #[test]
    fn path_end_one_hop() {
        let g = labeled(4, &[(0, 1), (1, 2), (2, 3)]);
        let (s, _) = khop_subgraph(&g, 0, 1).unwrap();
        assert_eq!(s.node_count(), 2);
        assert_eq!(s.edges(), &[(0, 1)]);
        let (s, label) = khop_subgraph(&g, 2, 1).unwrap();
        assert_eq!(label, 2);
        assert_eq!(s.node_labels().unwrap(), &[2, 1, 3]);
    }

    #[test]
    fn needs_labels() {
        let g = Graph::new(2, [(0, 1)]).unwrap();
        assert!(matches!(khop_subgraph(&g, 0, 1), Err(Error::Precondition(_))));
    }
}
