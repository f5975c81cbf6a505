use rayon::prelude::*;
use serde::Serialize;

use super::client::{Client, ClientConfig};
use super::partition::{dirichlet_partition, Partition};
use super::server::{ReleaseEvent, Server};
use super::FedConfig;
use crate::error::{Error, Result};
use crate::gnn::{ModelParams, TrainConfig};
use crate::graph::DatasetBundle;
use crate::ldp::EncodedEmbedding;
use crate::ot::{Metric, PairwiseResult, SolverConfig};
use crate::rng::derive_seed;

/// Machine-readable record of a federated run.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RunManifest {
    pub fed: FedConfig,
    pub learning_rate: f64,
    pub partition: Partition,
    /// `losses[round][client]`: mean training loss after local training.
    pub losses: Vec<Vec<f64>>,
    pub releases: Vec<ReleaseEvent>,
    pub unconverged_pairs: Vec<(usize, usize)>,
}

#[derive(Debug, Clone)]
pub struct FederationOutcome {
    pub global: ModelParams,
    /// Latest release of every graph, in dataset order.
    pub embeddings: Vec<EncodedEmbedding>,
    pub distances: PairwiseResult,
    pub manifest: RunManifest,
}

/// Initial global model. Input width is the width of the graphs' feature
/// matrices, output width the number of node classes.
pub fn initial_global(bundle: &DatasetBundle, cfg: &FedConfig) -> Result<ModelParams> {
    let first = bundle
        .graphs
        .first()
        .ok_or_else(|| Error::Precondition("federation needs at least one graph".into()))?;
    let width = first.features().ncols();
    if let Some(k) = bundle.graphs.iter().position(|g| g.features().ncols() != width) {
        return Err(Error::Shape(format!("graph {k} has a different feature width than graph 0")));
    }
    cfg.model.build(width, bundle.num_node_classes, derive_seed(cfg.seed, &[2]))
}

/// Runs `cfg.rounds` synchronous rounds and computes the pairwise GW matrix
/// of the released embeddings under `metric`.
///
/// Clients train concurrently; the server consumes their reports in
/// client-id order, so the result depends only on the seeds.
pub fn run_federation(
    bundle: &DatasetBundle,
    cfg: &FedConfig,
    train: &TrainConfig,
    solver: &SolverConfig,
    metric: Metric,
) -> Result<FederationOutcome> {
    cfg.validate()?;
    train.validate()?;
    solver.validate()?;
    let partition = dirichlet_partition(bundle, cfg.num_clients, cfg.dirichlet_alpha, derive_seed(cfg.seed, &[1]))?;
    let global = initial_global(bundle, cfg)?;
    let clients = partition
        .assignment
        .iter()
        .zip(&partition.splits)
        .enumerate()
        .map(|(c, (held, split))| {
            let graphs = held.iter().map(|&i| (i, bundle.graphs[i].clone())).collect();
            Client::new(c, graphs, &split.train)
        })
        .collect::<Result<Vec<_>>>()?;
    let client_cfg = ClientConfig {
        train: TrainConfig {
            epochs: cfg.local_epochs,
            ..*train
        },
        epsilon: cfg.epsilon_policy,
        cells: cfg.cell_policy,
        seed: derive_seed(cfg.seed, &[3]),
    };
    let mut server = Server::new(global, clients.len(), cfg.weighting);
    let mut losses = Vec::with_capacity(cfg.rounds);
    for round in 1..=cfg.rounds {
        let retrieve = cfg.retrieves_at(round);
        let global = server.global().clone();
        let reports = clients
            .par_iter()
            .map(|c| c.round(&global, &client_cfg, round, retrieve))
            .collect::<Result<Vec<_>>>()?;
        losses.push(reports.iter().map(|r| r.loss).collect());
        server.aggregate(round, reports)?;
    }
    let embeddings: Vec<EncodedEmbedding> = server.released().map(|(_, e)| e.clone()).collect();
    if embeddings.len() != bundle.len() {
        return Err(Error::Precondition(format!(
            "{} of {} graphs were released",
            embeddings.len(),
            bundle.len()
        )));
    }
    let distances = server.distances(metric, solver)?;
    let manifest = RunManifest {
        fed: cfg.clone(),
        learning_rate: train.learning_rate,
        partition,
        losses,
        releases: server.events().to_vec(),
        unconverged_pairs: distances.unconverged_pairs(),
    };
    Ok(FederationOutcome {
        global: server.global().clone(),
        embeddings,
        distances,
        manifest,
    })
}
