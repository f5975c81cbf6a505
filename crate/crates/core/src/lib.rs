//! Federated graph embeddings protected by a multi-bit local differential
//! privacy encoder, compared on the server by Gromov-Wasserstein discrepancy.
//!
//! The crate is organised along the pipeline:
//!
//! - [`graph`]: graphs, datasets, k-hop splits and shortest-path spaces
//! - [`gnn`]: dense GCN/GIN models trained with analytic gradients
//! - [`ldp`]: the multi-bit encoder and its privacy probe
//! - [`ot`]: GW / fused-GW solvers, barycenters and pairwise matrices
//! - [`federated`]: client partitioning, FedAvg and round orchestration
//! - [`downstream`]: clustering, classification, GED and the ε studies

// validation writes `!(x > 0.0)` so that NaN is rejected too
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod downstream;
pub mod error;
pub mod federated;
pub mod gnn;
pub mod graph;
pub mod ldp;
pub mod ot;
pub mod rng;

pub use error::{Error, Result};
