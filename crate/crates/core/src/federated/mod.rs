//! Simulated synchronous federation.
//!
//! Each round the server broadcasts the global model, every client trains
//! locally on the graphs it holds and returns its weights, and the server
//! aggregates them with FedAvg. On retrieval rounds clients also release
//! LDP-encoded node embeddings. Only [`ModelParams`] and
//! [`EncodedEmbedding`](crate::ldp::EncodedEmbedding) values cross from
//! [`client`] to [`server`].

pub mod aggregate;
pub mod client;
pub mod partition;
mod run;
pub mod server;

pub use aggregate::fedavg;
pub use client::{client_update, Client, ClientConfig, ClientReport, Release};
pub use partition::{dirichlet_partition, ClientSplit, Partition};
pub use run::{initial_global, run_federation, FederationOutcome, RunManifest};
pub use server::{ReleaseEvent, Server};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::gnn::{ModelParams, ModelSpec};

/// Budget used when a client encodes one graph's embedding.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EpsilonPolicy {
    /// `1 / |V|` of the graph being encoded.
    PerGraphDefault,
    Fixed(f64),
}

/// Number of released cells per embedding row.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CellPolicy {
    /// `max(1, min(h, ⌊ε / 2.18⌋))`.
    Optimal,
    Fixed(usize),
}

/// Aggregation weights.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum Weighting {
    /// Total node count of each client's training graphs.
    #[default]
    NodeCount,
    Uniform,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct FedConfig {
    pub rounds: usize,
    pub num_clients: usize,
    pub local_epochs: usize,
    /// Retrieve embeddings every `s` rounds and at the last round; 0 means
    /// the last round only.
    pub retrieval_period: usize,
    pub dirichlet_alpha: f64,
    pub epsilon_policy: EpsilonPolicy,
    pub cell_policy: CellPolicy,
    pub weighting: Weighting,
    pub model: ModelSpec,
    pub seed: u64,
}

impl Default for FedConfig {
    fn default() -> Self {
        FedConfig {
            rounds: 20,
            num_clients: 10,
            local_epochs: 5,
            retrieval_period: 0,
            dirichlet_alpha: 1.0,
            epsilon_policy: EpsilonPolicy::PerGraphDefault,
            cell_policy: CellPolicy::Optimal,
            weighting: Weighting::NodeCount,
            model: ModelSpec::default(),
            seed: 0,
        }
    }
}

impl FedConfig {
    pub fn validate(&self) -> Result<()> {
        if self.rounds == 0 || self.num_clients == 0 || self.local_epochs == 0 {
            return Err(Error::Parameter("rounds, num_clients and local_epochs must be at least 1".into()));
        }
        if !(self.dirichlet_alpha > 0.0) || !self.dirichlet_alpha.is_finite() {
            return Err(Error::Parameter(format!("dirichlet_alpha {} must be positive", self.dirichlet_alpha)));
        }
        if let EpsilonPolicy::Fixed(e) = self.epsilon_policy {
            if !(e > 0.0) || !e.is_finite() {
                return Err(Error::Parameter(format!("fixed epsilon {e} must be positive")));
            }
        }
        if self.cell_policy == CellPolicy::Fixed(0) {
            return Err(Error::Parameter("fixed m must be at least 1".into()));
        }
        self.model.validate()
    }

    /// Whether embeddings are released at round `r` (1-based).
    pub fn retrieves_at(&self, r: usize) -> bool {
        r == self.rounds || (self.retrieval_period > 0 && r.is_multiple_of(self.retrieval_period))
    }
}

pub(crate) fn check_same_shape(list: &[ModelParams]) -> Result<()> {
    let first = list
        .first()
        .ok_or_else(|| Error::Aggregation("no client parameters to aggregate".into()))?;
    if let Some(k) = list.iter().position(|p| !p.same_shape(first)) {
        return Err(Error::Aggregation(format!("client {k} parameters differ in shape from client 0")));
    }
    Ok(())
}
