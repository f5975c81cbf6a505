//! Server side of the federation. It sees model weights, aggregation
//! weights, losses and encoded embeddings, and nothing else.

use std::collections::BTreeMap;

use serde::Serialize;

use super::client::ClientReport;
use super::{fedavg, Weighting};
use crate::error::{Error, Result};
use crate::gnn::ModelParams;
use crate::ldp::{BudgetLedger, EncodedEmbedding};
use crate::ot::{cost_from_embedding, pairwise_gw_matrix, Metric, PairwiseResult, SolverConfig};

/// One embedding release as recorded by the server.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ReleaseEvent {
    pub round: usize,
    pub client: usize,
    pub graph: usize,
    pub epsilon: f64,
    pub m: usize,
    /// Sum of every budget this client has released so far.
    pub client_cumulative_epsilon: f64,
}

#[derive(Debug, Clone)]
pub struct Server {
    global: ModelParams,
    weighting: Weighting,
    latest: BTreeMap<usize, EncodedEmbedding>,
    budgets: Vec<BudgetLedger>,
    events: Vec<ReleaseEvent>,
}

impl Server {
    pub fn new(global: ModelParams, num_clients: usize, weighting: Weighting) -> Self {
        Server {
            global,
            weighting,
            latest: BTreeMap::new(),
            budgets: vec![BudgetLedger::default(); num_clients],
            events: Vec::new(),
        }
    }

    pub fn global(&self) -> &ModelParams {
        &self.global
    }

    /// FedAvg over one round of reports, consumed in client-id order. Any
    /// released embeddings replace earlier releases of the same graph.
    pub fn aggregate(&mut self, round: usize, mut reports: Vec<ClientReport>) -> Result<()> {
        reports.sort_by_key(|r| r.client);
        if let Some(r) = reports.iter().find(|r| r.client >= self.budgets.len()) {
            return Err(Error::Aggregation(format!("report from unknown client {}", r.client)));
        }
        let weights: Vec<f64> = reports
            .iter()
            .map(|r| match self.weighting {
                Weighting::NodeCount => r.train_nodes as f64,
                Weighting::Uniform => 1.0,
            })
            .collect();
        let params: Vec<ModelParams> = reports.iter().map(|r| r.params.clone()).collect();
        self.global = fedavg(&params, &weights)?;
        for report in reports {
            for release in report.releases.into_iter().flatten() {
                let ledger = &mut self.budgets[report.client];
                ledger.record(release.embedding.epsilon());
                self.events.push(ReleaseEvent {
                    round,
                    client: report.client,
                    graph: release.graph,
                    epsilon: release.embedding.epsilon(),
                    m: release.embedding.m(),
                    client_cumulative_epsilon: ledger.cumulative(),
                });
                self.latest.insert(release.graph, release.embedding);
            }
        }
        Ok(())
    }

    pub fn budget(&self, client: usize) -> Option<&BudgetLedger> {
        self.budgets.get(client)
    }

    pub fn events(&self) -> &[ReleaseEvent] {
        &self.events
    }

    /// Latest release per graph, by ascending graph index.
    pub fn released(&self) -> impl Iterator<Item = (usize, &EncodedEmbedding)> {
        self.latest.iter().map(|(&g, e)| (g, e))
    }

    /// Pairwise GW matrix over the latest releases, in graph-index order.
    pub fn distances(&self, metric: Metric, solver: &SolverConfig) -> Result<PairwiseResult> {
        let spaces = self
            .latest
            .values()
            .map(|e| cost_from_embedding(e, metric))
            .collect::<Result<Vec<_>>>()?;
        pairwise_gw_matrix(&spaces, solver, None, 1.0)
    }
}
