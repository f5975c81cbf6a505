//! Batch experiment runner: federated GNN training, ε-LDP encoding and
//! Gromov-Wasserstein comparison of graphs.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

mod commands;
mod config;
mod data;
mod failure;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use serde_json::json;

use config::{ExperimentConfig, Overrides, SolverChoice};
use failure::{Failure, Outcome};

#[derive(Debug, Parser)]
#[command(name = "fedgw", version, about)]
struct Cli {
    #[command(subcommand)]
    command: Command,
    /// TOML experiment file, or a manifest.json from an earlier run.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Output directory.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// Worker threads (0 = all cores).
    #[arg(long, global = true)]
    workers: Option<usize>,
    /// Exit with code 4 when any solve does not converge.
    #[arg(long, global = true)]
    strict: bool,
    /// Privacy budget per graph, replacing 1/|V|.
    #[arg(long, global = true)]
    epsilon: Option<f64>,
    /// Released cells per embedding row.
    #[arg(long, global = true)]
    m: Option<usize>,
    #[arg(long, global = true, value_enum)]
    solver: Option<SolverChoice>,
    /// GW on shortest paths and node labels, without training or encoding.
    #[arg(long, global = true)]
    raw_mode: bool,
}

#[derive(Debug, Clone, Subcommand)]
enum Command {
    /// Graph classification from pairwise distances.
    Classify,
    /// GW k-means with ARI against graph labels and MDS coordinates.
    Cluster,
    /// Mean and spread of pairwise GW across privacy budgets.
    Sweep,
    /// GW between graphs and their one-edge or one-node neighbours.
    Sensitivity,
    /// Edit distance, GW, fused GW and embedding GW on sampled graphs.
    MetricCompare,
    /// Encode a saved embedding matrix.
    Encode {
        /// CSV of embedding rows.
        #[arg(long)]
        input: Option<PathBuf>,
    },
}

impl Command {
    fn name(&self) -> &'static str {
        match self {
            Command::Classify => "classify",
            Command::Cluster => "cluster",
            Command::Sweep => "sweep",
            Command::Sensitivity => "sensitivity",
            Command::MetricCompare => "metric-compare",
            Command::Encode { .. } => "encode",
        }
    }
}

fn resolve(cli: &Cli) -> Outcome<ExperimentConfig> {
    let mut cfg = match &cli.config {
        Some(p) => config::load(p)?,
        None => ExperimentConfig::default(),
    };
    cfg.apply(&Overrides {
        seed: cli.seed,
        out: cli.out.clone(),
        workers: cli.workers,
        strict: cli.strict,
        epsilon: cli.epsilon,
        m: cli.m,
        solver: cli.solver,
        raw_mode: cli.raw_mode,
        input: match &cli.command {
            Command::Encode { input } => input.clone(),
            _ => None,
        },
    });
    cfg.resolve()
}

fn run(cli: &Cli) -> Outcome<()> {
    let cfg = resolve(cli)?;
    rayon::ThreadPoolBuilder::new()
        .num_threads(cfg.workers)
        .build_global()
        .map_err(|e| Failure::config(format!("workers: {e}")))?;
    std::fs::create_dir_all(&cfg.out)
        .map_err(|e| Failure::config(format!("out: cannot create {}: {e}", cfg.out.display())))?;

    let report = match cli.command {
        Command::Classify => commands::classify(&cfg),
        Command::Cluster => commands::cluster(&cfg),
        Command::Sweep => commands::sweep(&cfg),
        Command::Sensitivity => commands::sensitivity(&cfg),
        Command::MetricCompare => commands::metric_compare(&cfg),
        Command::Encode { .. } => commands::encode(&cfg),
    }
    .map_err(|f| f.context(cli.command.name()))?;

    let manifest = json!({
        "command": cli.command.name(),
        "version": env!("CARGO_PKG_VERSION"),
        "config": cfg,
        "report": report.summary,
        "federation": report.federation,
    });
    std::fs::write(cfg.out.join("manifest.json"), serde_json::to_string_pretty(&manifest)?)?;
    if report.unconverged > 0 {
        let message = format!("{} solves stopped at their iteration budget", report.unconverged);
        if cfg.strict {
            return Err(Failure::non_convergence(message));
        }
        log::warn!("{message}");
    }
    Ok(())
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    let cli = Cli::parse();
    match run(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => {
            eprintln!("error: {f}");
            ExitCode::from(f.code)
        }
    }
}
