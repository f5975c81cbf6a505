use fedgw::gnn::{with_inputs, InputEncoding};
use fedgw::graph::{khop_subgraph, load_edge_list_graph, load_tu_dataset, synthetic, DatasetBundle, Graph};
use fedgw::rng::{derive_seed, rng};
use rand::seq::SliceRandom;
use rand::Rng as _;

use crate::config::{DatasetSpec, ExperimentConfig};
use crate::failure::{Failure, Outcome};

/// A loaded dataset: either many labeled graphs or one graph to be split.
pub enum Source {
    Many(DatasetBundle),
    Single { name: String, graph: Graph },
}

pub fn load(cfg: &ExperimentConfig) -> Outcome<Source> {
    let spec = cfg
        .dataset
        .as_ref()
        .ok_or_else(|| Failure::config("no [dataset] section"))?;
    let source = match spec {
        DatasetSpec::Tu { path, name } => Source::Many(load_tu_dataset(path, name).map_err(as_data)?),
        DatasetSpec::EdgeList { edges, features, labels } => Source::Single {
            name: edges.display().to_string(),
            graph: load_edge_list_graph(edges, features.as_deref(), labels.as_deref()).map_err(as_data)?,
        },
        DatasetSpec::Citation(c) => Source::Single {
            name: "citation".into(),
            graph: synthetic::citation_graph(&c.into()),
        },
        DatasetSpec::Planted {
            per_class,
            min_nodes,
            max_nodes,
            seed,
        } => Source::Many(planted(*per_class, *min_nodes, *max_nodes, *seed)),
    };
    if let Source::Many(b) = &source {
        if b.is_empty() {
            return Err(Failure::data(format!("dataset {} has no graphs", b.name)));
        }
    }
    log::info!("loaded dataset");
    Ok(source)
}

fn as_data(e: fedgw::Error) -> Failure {
    Failure::data(e.to_string())
}

/// Cycles (label 0) against stars (label 1) of random sizes, with node
/// labels marking leaves, path nodes and hubs.
pub fn planted(per_class: usize, min_nodes: usize, max_nodes: usize, seed: u64) -> DatasetBundle {
    let mut r = rng(seed);
    let mut graphs = Vec::with_capacity(2 * per_class);
    for _ in 0..per_class {
        for class in 0..2 {
            let n = r.random_range(min_nodes..=max_nodes);
            let g = if class == 0 { synthetic::cycle(n) } else { synthetic::star(n - 1) };
            let labels = (0..n).map(|u| g.degree(u).min(3) - 1).collect();
            graphs.push(g.with_node_labels(labels).expect("labels match the node count").with_graph_label(class));
        }
    }
    DatasetBundle::new("planted", graphs)
}

/// The dataset as a bundle of graphs. A single graph is cut into k-hop
/// subgraphs around randomly ordered centers, each labeled by its center.
pub fn bundle(source: Source, cfg: &ExperimentConfig) -> Outcome<DatasetBundle> {
    match source {
        Source::Many(b) => Ok(b),
        Source::Single { name, graph } => {
            let s = &cfg.subgraphs;
            let mut centers: Vec<usize> = (0..graph.node_count()).collect();
            centers.shuffle(&mut rng(derive_seed(cfg.seed, &[10])));
            let mut graphs = Vec::new();
            for c in centers {
                if graphs.len() == s.max_subgraphs {
                    break;
                }
                let (sub, label) = khop_subgraph(&graph, c, s.hops).map_err(as_data)?;
                if sub.node_count() >= s.min_nodes {
                    graphs.push(sub.with_graph_label(label as i64));
                }
            }
            if graphs.len() < 2 {
                return Err(Failure::data(format!("{name}: fewer than two subgraphs of at least {} nodes", s.min_nodes)));
            }
            let mut b = DatasetBundle::new(format!("{name}-{}hop", s.hops), graphs);
            b.num_node_classes = b.num_node_classes.max(graph.node_labels().map_or(0, |l| l.iter().max().map_or(0, |m| m + 1)));
            log::info!("{} subgraphs from {} nodes", b.len(), graph.node_count());
            Ok(b)
        }
    }
}

/// Give every graph a model input: its features when present, otherwise
/// one-hot node labels, otherwise one-hot degrees.
pub fn with_model_inputs(b: &DatasetBundle) -> Outcome<DatasetBundle> {
    let max_degree = b
        .graphs
        .iter()
        .flat_map(|g| (0..g.node_count()).map(move |u| g.degree(u)))
        .max()
        .unwrap_or(0);
    let encoding = b
        .graphs
        .first()
        .map(|g| InputEncoding::infer(g, b.num_node_classes, max_degree))
        .unwrap_or(InputEncoding::OneHotDegree(max_degree));
    let graphs = b
        .graphs
        .iter()
        .map(|g| with_inputs(g, encoding))
        .collect::<Result<Vec<_>, _>>()?;
    let mut out = DatasetBundle::new(b.name.clone(), graphs);
    out.num_node_classes = b.num_node_classes;
    if out.num_node_classes < 2 {
        return Err(Failure::data(format!("{}: training needs at least two node classes", b.name)));
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn planted_classes_alternate_and_are_labeled() {
        let b = planted(3, 4, 6, 1);
        assert_eq!(b.graph_labels().unwrap(), vec![0, 1, 0, 1, 0, 1]);
        assert_eq!(b.num_node_classes, 3);
        assert!(b.graphs.iter().all(|g| (4..=6).contains(&g.node_count())));
    }
}
