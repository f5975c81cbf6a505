use std::collections::VecDeque;

use ndarray::Array2;

use super::{uniform_measure, Graph, MetricMeasureSpace};

/// Hop-count shortest paths with the uniform measure.
///
/// Pairs in different components get cost `n`, one more than the longest
/// possible path.
pub fn apsp(g: &Graph) -> MetricMeasureSpace {
    let n = g.node_count();
    let unreachable = n as f64;
    let mut cost = Array2::from_elem((n, n), unreachable);
    let mut queue = VecDeque::new();
    for s in 0..n {
        let mut dist = vec![usize::MAX; n];
        dist[s] = 0;
        queue.push_back(s);
        while let Some(u) = queue.pop_front() {
            for &v in g.neighbors(u) {
                if dist[v] == usize::MAX {
                    dist[v] = dist[u] + 1;
                    queue.push_back(v);
                }
            }
        }
        for (t, &d) in dist.iter().enumerate() {
            if d != usize::MAX {
                cost[[s, t]] = d as f64;
            }
        }
    }
    MetricMeasureSpace::new(cost, uniform_measure(n)).expect("hop distances form a valid space")
}
