use super::{CellPolicy, EpsilonPolicy};
use crate::error::{Error, Result};
use crate::gnn::{extract_embedding, train_local_traced, ModelParams, TrainConfig};
use crate::graph::Graph;
use crate::ldp::{default_epsilon, multibit_encode, optimal_m, EncodedEmbedding};
use crate::rng::derive_seed;

/// Local training and release settings shared by all clients.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ClientConfig {
    /// `epochs` is the number of local epochs per graph per round.
    pub train: TrainConfig,
    pub epsilon: EpsilonPolicy,
    pub cells: CellPolicy,
    pub seed: u64,
}

impl ClientConfig {
    fn epsilon_for(&self, g: &Graph) -> f64 {
        match self.epsilon {
            EpsilonPolicy::PerGraphDefault => default_epsilon(g),
            EpsilonPolicy::Fixed(e) => e,
        }
    }

    fn cells_for(&self, epsilon: f64, width: usize) -> usize {
        match self.cells {
            CellPolicy::Optimal => optimal_m(epsilon, width),
            CellPolicy::Fixed(m) => m,
        }
    }
}

/// One graph's encoded embedding, tagged with its dataset index.
#[derive(Debug, Clone, PartialEq)]
pub struct Release {
    pub graph: usize,
    pub embedding: EncodedEmbedding,
}

/// Everything a client sends back to the server in one round.
#[derive(Debug, Clone, PartialEq)]
pub struct ClientReport {
    pub client: usize,
    pub params: ModelParams,
    /// Total node count of the training graphs, used as aggregation weight.
    pub train_nodes: usize,
    /// Mean loss over the training graphs at the last local epoch.
    pub loss: f64,
    pub releases: Option<Vec<Release>>,
}

fn train_sequentially<'a>(
    graphs: impl Iterator<Item = &'a Graph>,
    global: &ModelParams,
    cfg: &TrainConfig,
) -> Result<(ModelParams, f64)> {
    let mut params = global.clone();
    let (mut total, mut count) = (0.0, 0usize);
    for g in graphs {
        let (next, losses) = train_local_traced(g, &params, cfg)?;
        params = next;
        total += losses.last().copied().unwrap_or(f64::NAN);
        count += 1;
    }
    Ok((params, total / count.max(1) as f64))
}

fn encode(g: &Graph, params: &ModelParams, cfg: &ClientConfig, seed: u64) -> Result<EncodedEmbedding> {
    let h = extract_embedding(g, params)?;
    let epsilon = cfg.epsilon_for(g);
    let m = cfg.cells_for(epsilon, h.values().ncols());
    multibit_encode(&h, epsilon, m, seed)
}

/// One round of local work: start from `global`, train on each graph in
/// turn for `cfg.train.epochs` epochs, and when `retrieve` is set release
/// every graph's encoded embedding. Raw embeddings never leave this call.
pub fn client_update(
    graphs: &[Graph],
    global: &ModelParams,
    cfg: &ClientConfig,
    retrieve: bool,
) -> Result<(ModelParams, Option<Vec<EncodedEmbedding>>)> {
    if graphs.is_empty() {
        return Err(Error::Precondition("a client must hold at least one graph".into()));
    }
    let (params, _) = train_sequentially(graphs.iter(), global, &cfg.train)?;
    let released = if retrieve {
        Some(
            graphs
                .iter()
                .enumerate()
                .map(|(k, g)| encode(g, &params, cfg, derive_seed(cfg.seed, &[k as u64])))
                .collect::<Result<Vec<_>>>()?,
        )
    } else {
        None
    };
    Ok((params, released))
}

/// A participant holding private graphs. Training uses the client's training
/// split; releases cover every graph it holds.
#[derive(Debug, Clone)]
pub struct Client {
    id: usize,
    graphs: Vec<(usize, Graph)>,
    train: Vec<usize>,
}

impl Client {
    /// `graphs` pairs dataset indices with graphs; `train` lists the dataset
    /// indices used for training.
    pub fn new(id: usize, graphs: Vec<(usize, Graph)>, train: &[usize]) -> Result<Self> {
        let train: Vec<usize> = graphs
            .iter()
            .enumerate()
            .filter(|(_, (gi, _))| train.contains(gi))
            .map(|(k, _)| k)
            .collect();
        if train.is_empty() {
            return Err(Error::Precondition(format!("client {id} has no training graph")));
        }
        Ok(Client { id, graphs, train })
    }

    pub fn id(&self) -> usize {
        self.id
    }

    pub fn num_graphs(&self) -> usize {
        self.graphs.len()
    }

    pub fn round(&self, global: &ModelParams, cfg: &ClientConfig, round: usize, retrieve: bool) -> Result<ClientReport> {
        let (params, loss) = train_sequentially(self.train.iter().map(|&k| &self.graphs[k].1), global, &cfg.train)?;
        let releases = if retrieve {
            let mut out = Vec::with_capacity(self.graphs.len());
            for (gi, g) in &self.graphs {
                let seed = derive_seed(cfg.seed, &[round as u64, self.id as u64, *gi as u64]);
                out.push(Release {
                    graph: *gi,
                    embedding: encode(g, &params, cfg, seed)?,
                });
            }
            Some(out)
        } else {
            None
        };
        Ok(ClientReport {
            client: self.id,
            params,
            train_nodes: self.train.iter().map(|&k| self.graphs[k].1.node_count()).sum(),
            loss,
            releases,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::graph::synthetic;
    use ndarray::Array2;

    fn labeled(g: Graph) -> Graph {
        let n = g.node_count();
        let x = Array2::from_shape_fn((n, 2), |(i, j)| ((i + j) % 2) as f64);
        g.with_features(x).unwrap().with_node_labels((0..n).map(|i| i % 2).collect()).unwrap()
    }

    fn cfg(lr: f64) -> ClientConfig {
        ClientConfig {
            train: TrainConfig::new(1, lr, 0).unwrap(),
            epsilon: EpsilonPolicy::PerGraphDefault,
            cells: CellPolicy::Optimal,
            seed: 5,
        }
    }

    #[test]
    fn no_retrieval_no_release() {
        let g = labeled(synthetic::path(3));
        let global = ModelParams::gcn(2, 3, 2, 1);
        let (p, rel) = client_update(&[g], &global, &cfg(0.0), false).unwrap();
        assert!(rel.is_none());
        assert_eq!(p, global);
    }

    #[test]
    fn release_is_ternary_with_m_cells() {
        let g = labeled(synthetic::path(3));
        let global = ModelParams::gcn(2, 3, 2, 1);
        let (_, rel) = client_update(&[g], &global, &cfg(0.1), true).unwrap();
        let rel = rel.unwrap();
        assert_eq!(rel.len(), 1);
        let e = &rel[0];
        assert_eq!(e.values().dim(), (3, 2));
        assert_eq!(e.m(), 1);
        for row in e.values().rows() {
            assert!(row.iter().all(|v| [-1, 0, 1].contains(v)));
            assert_eq!(row.iter().filter(|&&v| v != 0).count(), 1);
        }
        assert_eq!(e.epsilon(), 1.0 / 3.0);
    }

    #[test]
    fn empty_client_rejected() {
        let global = ModelParams::gcn(2, 3, 2, 1);
        assert!(client_update(&[], &global, &cfg(0.1), false).is_err());
        assert!(Client::new(0, vec![(4, labeled(synthetic::path(2)))], &[1]).is_err());
    }
}
