use std::collections::BTreeMap;
use std::path::Path;

use fedgw::downstream::{
    adjusted_rand_index, classical_mds, cross_validate, default_c_grid, default_gamma_grid, epsilon_sweep,
    ged_bruteforce, gw_kmeans, knn_classify, matrix_csv, neighbor_sensitivity, stratified_split, sweep_csv,
    NeighborMode,
};
use fedgw::federated::{run_federation, FederationOutcome};
use fedgw::gnn::{extract_embedding, ModelParams, TrainConfig};
use fedgw::graph::{apsp, DatasetBundle, Graph, MetricMeasureSpace};
use fedgw::ldp::{multibit_encode, optimal_m, EmbeddingMatrix};
use fedgw::ot::{cost_from_embedding, pairwise_gw_matrix, PairwiseResult};
use fedgw::rng::{derive_seed, rng};
use ndarray::Array2;
use rand::seq::SliceRandom;
use serde_json::{json, Value};

use crate::config::{Classifier, ExperimentConfig, SensitivityEmbedding};
use crate::data::{self, with_model_inputs};
use crate::failure::{Failure, Outcome};

/// What a command produced: a JSON summary, the federation manifest when
/// one ran, and how many solves hit their iteration budget.
pub struct Report {
    pub summary: Value,
    pub federation: Option<fedgw::federated::RunManifest>,
    pub unconverged: usize,
}

fn write(dir: &Path, name: &str, text: String) -> Outcome<()> {
    std::fs::write(dir.join(name), text).map_err(|e| Failure::from(e).context(name))
}

fn load_bundle(cfg: &ExperimentConfig) -> Outcome<DatasetBundle> {
    data::bundle(data::load(cfg)?, cfg)
}

fn federate(inputs: &DatasetBundle, cfg: &ExperimentConfig) -> Outcome<FederationOutcome> {
    let train = TrainConfig::new(1, cfg.train.learning_rate, cfg.seed)?;
    log::info!(
        "federation: {} graphs, {} clients, {} rounds",
        inputs.len(),
        cfg.federation.num_clients,
        cfg.federation.rounds
    );
    Ok(run_federation(inputs, &cfg.federation, &train, &cfg.solver, cfg.distance.metric)?)
}

/// Stored node features, or one-hot node labels for featureless graphs.
fn node_attributes(g: &Graph, classes: usize) -> Outcome<Option<Array2<f64>>> {
    if g.features().ncols() > 0 {
        Ok(Some(g.features().clone()))
    } else if g.node_labels().is_some() && classes > 0 {
        Ok(Some(g.one_hot_labels(classes)?))
    } else {
        Ok(None)
    }
}

/// Shortest-path GW, fused with node attributes when every graph has them
/// and the trade-off leaves room for a feature term.
fn raw_distances(graphs: &[Graph], classes: usize, cfg: &ExperimentConfig) -> Outcome<PairwiseResult> {
    let spaces: Vec<MetricMeasureSpace> = graphs.iter().map(apsp).collect();
    let attrs = graphs
        .iter()
        .map(|g| node_attributes(g, classes))
        .collect::<Outcome<Option<Vec<_>>>>()?;
    let trade_off = cfg.distance.trade_off;
    match attrs {
        Some(f) if trade_off < 1.0 => Ok(pairwise_gw_matrix(&spaces, &cfg.solver, Some(&f), trade_off)?),
        _ => Ok(pairwise_gw_matrix(&spaces, &cfg.solver, None, 1.0)?),
    }
}

fn population_std(v: &[f64]) -> (f64, f64) {
    let n = v.len().max(1) as f64;
    let mean = v.iter().sum::<f64>() / n;
    (mean, (v.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / n).sqrt())
}

pub fn classify(cfg: &ExperimentConfig) -> Outcome<Report> {
    let bundle = load_bundle(cfg)?;
    let labels = bundle.graph_labels()?;
    let (distances, federation) = if cfg.distance.raw_mode {
        (raw_distances(&bundle.graphs, bundle.num_node_classes, cfg)?, None)
    } else {
        let out = federate(&with_model_inputs(&bundle)?, cfg)?;
        (out.distances, Some(out.manifest))
    };
    let mut unconverged = distances.unconverged_pairs().len();
    let c = &cfg.classify;
    let summary = match c.classifier {
        Classifier::Svm => {
            let c_grid = c.c_grid.clone().unwrap_or_else(default_c_grid);
            let gamma_grid = c.gamma_grid.clone().unwrap_or_else(default_gamma_grid);
            let cv = cross_validate(&distances.matrix, &labels, &c_grid, &gamma_grid, c.folds, cfg.seed)?;
            unconverged += cv.splits.iter().filter(|s| !s.converged).count();
            println!("accuracy {:.4} ± {:.4} over {} splits (SVM)", cv.mean_accuracy, cv.std, c.folds);
            serde_json::to_value(&cv)?
        }
        Classifier::Knn => {
            let mut accuracies = Vec::with_capacity(c.folds);
            for f in 0..c.folds {
                let split = stratified_split(&labels, derive_seed(cfg.seed, &[f as u64]))?;
                let train: Vec<usize> = split.train.iter().chain(&split.validation).copied().collect();
                let train_labels: Vec<i64> = train.iter().map(|&i| labels[i]).collect();
                let predicted = knn_classify(&distances.matrix, &train, &train_labels, &split.test, c.knn_k)?;
                let hits = predicted.iter().zip(&split.test).filter(|(p, &t)| **p == labels[t]).count();
                accuracies.push(hits as f64 / split.test.len() as f64);
            }
            let (mean, std) = population_std(&accuracies);
            println!("accuracy {mean:.4} ± {std:.4} over {} splits ({}-NN)", c.folds, c.knn_k);
            json!({ "mean_accuracy": mean, "std": std, "accuracies": accuracies, "k": c.knn_k })
        }
    };
    write(&cfg.out, "distances.csv", matrix_csv(&distances.matrix))?;
    Ok(Report {
        summary: json!({ "graphs": bundle.len(), "unconverged_pairs": distances.unconverged_pairs().len(), "cv": summary }),
        federation,
        unconverged,
    })
}

/// Dense cluster ids for arbitrary labels, in order of first appearance.
fn dense(labels: &[i64]) -> Vec<usize> {
    let mut ids = BTreeMap::new();
    labels
        .iter()
        .map(|l| {
            let next = ids.len();
            *ids.entry(*l).or_insert(next)
        })
        .collect()
}

pub fn cluster(cfg: &ExperimentConfig) -> Outcome<Report> {
    let bundle = load_bundle(cfg)?;
    let truth = dense(&bundle.graph_labels()?);
    let classes = truth.iter().max().map_or(0, |m| m + 1);
    let k = cfg.cluster.k.unwrap_or(classes);
    let (spaces, distances, federation) = if cfg.distance.raw_mode {
        let spaces: Vec<MetricMeasureSpace> = bundle.graphs.iter().map(apsp).collect();
        let d = pairwise_gw_matrix(&spaces, &cfg.solver, None, 1.0)?;
        (spaces, d, None)
    } else {
        let out = federate(&with_model_inputs(&bundle)?, cfg)?;
        let spaces = out
            .embeddings
            .iter()
            .map(|e| cost_from_embedding(e, cfg.distance.metric))
            .collect::<Result<Vec<_>, _>>()?;
        (spaces, out.distances, Some(out.manifest))
    };
    let assignment = gw_kmeans(&spaces, k, &cfg.solver, cfg.cluster.max_iters, cfg.seed)?;
    let ari = adjusted_rand_index(&assignment.labels, &truth)?;
    let coords = classical_mds(&distances.matrix, cfg.cluster.mds_dims)?;
    println!("k = {k}, ARI {ari:.4} against pseudo-labels, inertia {:.6}", assignment.inertia);

    let mut table = String::from("graph,label,cluster\n");
    for (i, (t, c)) in truth.iter().zip(&assignment.labels).enumerate() {
        table.push_str(&format!("{i},{t},{c}\n"));
    }
    write(&cfg.out, "assignments.csv", table)?;
    write(&cfg.out, "mds.csv", matrix_csv(&coords))?;
    write(&cfg.out, "distances.csv", matrix_csv(&distances.matrix))?;
    let unconverged = distances.unconverged_pairs().len();
    Ok(Report {
        summary: json!({
            "graphs": bundle.len(),
            "k": k,
            "ari": ari,
            "inertia": assignment.inertia,
            "iterations": assignment.iterations,
            "inertia_history": assignment.inertia_history,
            "unconverged_pairs": unconverged,
        }),
        federation,
        unconverged,
    })
}

pub fn sweep(cfg: &ExperimentConfig) -> Outcome<Report> {
    let inputs = with_model_inputs(&load_bundle(cfg)?)?;
    let out = federate(&inputs, cfg)?;
    let budgets = cfg.sweep.parsed()?;
    let rows = epsilon_sweep(
        &inputs.graphs,
        &out.global,
        &budgets,
        cfg.sweep.repeats,
        &cfg.solver,
        cfg.distance.metric,
        derive_seed(cfg.seed, &[20]),
    )?;
    for r in &rows {
        println!("ε = {:>6}: mean {:.6} std {:.6}", r.budget, r.mean, r.std);
    }
    write(&cfg.out, "sweep.csv", sweep_csv(&rows))?;
    Ok(Report {
        unconverged: rows.iter().map(|r| r.unconverged).sum(),
        summary: json!({ "graphs": inputs.len(), "repeats": cfg.sweep.repeats, "rows": rows }),
        federation: Some(out.manifest),
    })
}

pub fn sensitivity(cfg: &ExperimentConfig) -> Outcome<Report> {
    let bundle = load_bundle(cfg)?;
    let s = &cfg.sensitivity;
    let modes = match s.mode {
        Some(m) => vec![m],
        None => vec![NeighborMode::Edge, NeighborMode::Node],
    };
    let (graphs, params, federation): (Vec<Graph>, Option<ModelParams>, _) = match s.embedding {
        SensitivityEmbedding::Apsp => (bundle.graphs, None, None),
        SensitivityEmbedding::Gnn => {
            let inputs = with_model_inputs(&bundle)?;
            let out = federate(&inputs, cfg)?;
            (inputs.graphs, Some(out.global), Some(out.manifest))
        }
    };
    let metric = cfg.distance.metric;
    let embed = |g: &Graph| match &params {
        None => Ok(apsp(g)),
        Some(p) => cost_from_embedding(&extract_embedding(g, p)?, metric),
    };

    let mut table = String::from("graph,mode,trial,value\n");
    let mut by_mode: BTreeMap<&str, Vec<f64>> = BTreeMap::new();
    let mut skipped_graphs = 0;
    for (i, g) in graphs.iter().take(s.graphs).enumerate() {
        for &mode in &modes {
            let name = match mode {
                NeighborMode::Edge => "edge",
                NeighborMode::Node => "node",
            };
            let seed = derive_seed(cfg.seed, &[30, i as u64]);
            let report = match neighbor_sensitivity(g, mode, embed, &cfg.solver, s.trials, seed) {
                Ok(r) => r,
                Err(fedgw::Error::Precondition(why)) => {
                    log::warn!("graph {i}, {name} neighbours skipped: {why}");
                    skipped_graphs += 1;
                    continue;
                }
                Err(e) => return Err(e.into()),
            };
            let completed = (0..s.trials).filter(|t| !report.skipped.contains(t));
            for (t, v) in completed.zip(&report.values) {
                table.push_str(&format!("{i},{name},{t},{v:?}\n"));
            }
            by_mode.entry(name).or_default().extend(&report.values);
        }
    }
    let mut summary = serde_json::Map::new();
    for (name, values) in &by_mode {
        let (mean, std) = population_std(values);
        println!("{name} neighbours: mean {mean:.6}, variance {:.6} over {} trials", std * std, values.len());
        summary.insert(
            (*name).into(),
            json!({ "mean": mean, "variance": std * std, "trials": values.len() }),
        );
    }
    summary.insert("skipped_graph_modes".into(), json!(skipped_graphs));
    write(&cfg.out, "sensitivity.csv", table)?;
    Ok(Report {
        summary: Value::Object(summary),
        federation,
        unconverged: 0,
    })
}

pub fn metric_compare(cfg: &ExperimentConfig) -> Outcome<Report> {
    let bundle = load_bundle(cfg)?;
    let n = cfg.metric_compare.samples;
    if bundle.len() < n {
        return Err(Failure::data(format!("{} graphs available, {n} samples requested", bundle.len())));
    }
    let mut order: Vec<usize> = (0..bundle.len()).collect();
    order.shuffle(&mut rng(derive_seed(cfg.seed, &[40])));
    let picked: Vec<usize> = order[..n].to_vec();
    let sample: Vec<Graph> = picked.iter().map(|&i| bundle.graphs[i].clone()).collect();

    let cap = cfg.metric_compare.ged_cap;
    let mut ged = Array2::zeros((n, n));
    let mut over_cap = 0;
    for i in 0..n {
        for j in i + 1..n {
            let v = match ged_bruteforce(&sample[i], &sample[j], cap) {
                Ok(d) => d as f64,
                Err(fedgw::Error::SizeCap { .. }) => {
                    over_cap += 1;
                    f64::NAN
                }
                Err(e) => return Err(e.into()),
            };
            ged[[i, j]] = v;
            ged[[j, i]] = v;
        }
    }
    let spaces: Vec<MetricMeasureSpace> = sample.iter().map(apsp).collect();
    let gw_a = pairwise_gw_matrix(&spaces, &cfg.solver, None, 1.0)?;
    let attrs = sample
        .iter()
        .map(|g| node_attributes(g, bundle.num_node_classes))
        .collect::<Outcome<Option<Vec<_>>>>()?
        .ok_or_else(|| Failure::data("fused GW needs node features or node labels on every graph"))?;
    let fgw_ax = pairwise_gw_matrix(&spaces, &cfg.solver, Some(&attrs), cfg.distance.trade_off)?;

    let inputs = with_model_inputs(&bundle)?;
    let out = federate(&inputs, cfg)?;
    let hidden = picked
        .iter()
        .map(|&i| cost_from_embedding(&extract_embedding(&inputs.graphs[i], &out.global)?, cfg.distance.metric))
        .collect::<Result<Vec<_>, _>>()?;
    let gw_h = pairwise_gw_matrix(&hidden, &cfg.solver, None, 1.0)?;

    write(&cfg.out, "ged.csv", matrix_csv(&ged))?;
    write(&cfg.out, "gw_a.csv", matrix_csv(&gw_a.matrix))?;
    write(&cfg.out, "fgw_ax.csv", matrix_csv(&fgw_ax.matrix))?;
    write(&cfg.out, "gw_h.csv", matrix_csv(&gw_h.matrix))?;
    let mut table = String::from("sample,graph,nodes,edges,label\n");
    for (k, &i) in picked.iter().enumerate() {
        let g = &bundle.graphs[i];
        let label = g.graph_label().map_or(String::new(), |l| l.to_string());
        table.push_str(&format!("{k},{i},{},{},{label}\n", g.node_count(), g.edge_count()));
    }
    write(&cfg.out, "samples.csv", table)?;
    println!("wrote four {n}x{n} matrices ({over_cap} edit distances above the size cap of {cap})");
    let unconverged = [&gw_a, &fgw_ax, &gw_h].iter().map(|r| r.unconverged_pairs().len()).sum();
    Ok(Report {
        summary: json!({ "samples": picked, "ged_over_cap": over_cap, "unconverged_pairs": unconverged }),
        federation: Some(out.manifest),
        unconverged,
    })
}

fn read_matrix(path: &Path) -> Outcome<Array2<f64>> {
    let name = path.display().to_string();
    let text = std::fs::read_to_string(path).map_err(|e| Failure::data(format!("cannot read {name}: {e}")))?;
    let mut rows: Vec<Vec<f64>> = Vec::new();
    for (i, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let row = line
            .split(',')
            .map(|t| t.trim().parse::<f64>())
            .collect::<Result<Vec<_>, _>>()
            .map_err(|e| Failure::data(format!("{name} line {}: {e}", i + 1)))?;
        if rows.first().is_some_and(|r| r.len() != row.len()) {
            return Err(Failure::data(format!("{name} line {}: ragged row", i + 1)));
        }
        rows.push(row);
    }
    let h = rows.first().map_or(0, Vec::len);
    if rows.is_empty() || h == 0 {
        return Err(Failure::data(format!("{name}: no embedding rows")));
    }
    Ok(Array2::from_shape_vec((rows.len(), h), rows.concat()).expect("rows have equal length"))
}

/// Encode one saved embedding matrix, outside any federation.
pub fn encode(cfg: &ExperimentConfig) -> Outcome<Report> {
    let e = &cfg.encode;
    let input = e
        .input
        .as_ref()
        .ok_or_else(|| Failure::config("encode needs an input embedding (--input or encode.input)"))?;
    let values = read_matrix(input)?;
    let (n, h) = values.dim();
    let matrix = EmbeddingMatrix::new(values, e.alpha, e.beta).map_err(|err| Failure::data(err.to_string()))?;
    let epsilon = cfg.ldp.epsilon.unwrap_or(1.0 / n as f64);
    let m = cfg.ldp.m.unwrap_or_else(|| optimal_m(epsilon, h));
    if m > h {
        return Err(Failure::config(format!("ldp.m = {m} exceeds the embedding width {h}")));
    }
    let encoded = multibit_encode(&matrix, epsilon, m, derive_seed(cfg.seed, &[50]))?;
    write(&cfg.out, "encoded.csv", encoded.to_csv())?;
    println!("encoded {n}x{h} with ε = {epsilon}, m = {m}");
    Ok(Report {
        summary: json!({ "rows": n, "width": h, "epsilon": epsilon, "m": m, "cell_epsilon": encoded.cell_epsilon() }),
        federation: None,
        unconverged: 0,
    })
}
