use std::path::{Path, PathBuf};

use fedgw::downstream::{Budget, NeighborMode};
use fedgw::federated::{CellPolicy, EpsilonPolicy, FedConfig};
use fedgw::graph::synthetic::CitationConfig;
use fedgw::ot::{InnerSolver, Method, Metric, SolverConfig};
use serde::{Deserialize, Serialize};

use crate::failure::{Failure, Outcome};

/// Where the graphs come from.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum DatasetSpec {
    /// TU benchmark files `{name}_A.txt`, ... in `path`.
    Tu { path: PathBuf, name: String },
    /// One graph from an edge list with optional feature and label files.
    EdgeList {
        edges: PathBuf,
        #[serde(default)]
        features: Option<PathBuf>,
        #[serde(default)]
        labels: Option<PathBuf>,
    },
    /// One synthetic labeled citation-style network.
    Citation(CitationSpec),
    /// Two classes of graphs told apart by shape: cycles and stars.
    Planted { per_class: usize, min_nodes: usize, max_nodes: usize, seed: u64 },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CitationSpec {
    pub nodes: usize,
    pub classes: usize,
    pub feature_dim: usize,
    pub mean_degree: f64,
    pub homophily: f64,
    pub word_rate: f64,
    pub seed: u64,
}

impl Default for CitationSpec {
    fn default() -> Self {
        let c = CitationConfig::default();
        CitationSpec {
            nodes: c.nodes,
            classes: c.classes,
            feature_dim: c.feature_dim,
            mean_degree: c.mean_degree,
            homophily: c.homophily,
            word_rate: c.word_rate,
            seed: c.seed,
        }
    }
}

impl From<&CitationSpec> for CitationConfig {
    fn from(s: &CitationSpec) -> Self {
        CitationConfig {
            nodes: s.nodes,
            classes: s.classes,
            feature_dim: s.feature_dim,
            mean_degree: s.mean_degree,
            homophily: s.homophily,
            word_rate: s.word_rate,
            seed: s.seed,
        }
    }
}

/// k-hop split of a single-graph dataset into per-client subgraphs.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SubgraphSection {
    pub hops: usize,
    pub max_subgraphs: usize,
    /// Subgraphs with fewer nodes are dropped.
    pub min_nodes: usize,
}

impl Default for SubgraphSection {
    fn default() -> Self {
        SubgraphSection {
            hops: 1,
            max_subgraphs: 500,
            min_nodes: 2,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TrainSection {
    pub learning_rate: f64,
}

impl Default for TrainSection {
    fn default() -> Self {
        TrainSection { learning_rate: 0.05 }
    }
}

/// Overrides of the federation's privacy budget and cells per row.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct LdpSection {
    pub epsilon: Option<f64>,
    pub m: Option<usize>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DistanceSection {
    pub metric: Metric,
    /// Skip training and encoding: GW on shortest-path spaces, fused with
    /// one-hot node labels when they exist.
    pub raw_mode: bool,
    /// Weight of the structure term in fused GW.
    pub trade_off: f64,
}

impl Default for DistanceSection {
    fn default() -> Self {
        DistanceSection {
            metric: Metric::Euclidean,
            raw_mode: false,
            trade_off: 0.5,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Classifier {
    Svm,
    Knn,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ClassifySection {
    pub classifier: Classifier,
    pub folds: usize,
    pub knn_k: usize,
    pub c_grid: Option<Vec<f64>>,
    pub gamma_grid: Option<Vec<f64>>,
}

impl Default for ClassifySection {
    fn default() -> Self {
        ClassifySection {
            classifier: Classifier::Svm,
            folds: 10,
            knn_k: 3,
            c_grid: None,
            gamma_grid: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ClusterSection {
    /// Number of clusters; the number of distinct labels when unset.
    pub k: Option<usize>,
    pub max_iters: usize,
    pub mds_dims: usize,
}

impl Default for ClusterSection {
    fn default() -> Self {
        ClusterSection {
            k: None,
            max_iters: 30,
            mds_dims: 2,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SweepSection {
    /// `"0"`, `"1/|V|"` or a number.
    pub budgets: Vec<String>,
    pub repeats: usize,
}

impl Default for SweepSection {
    fn default() -> Self {
        SweepSection {
            budgets: ["0", "1/|V|", "0.1", "1"].map(String::from).to_vec(),
            repeats: 20,
        }
    }
}

impl SweepSection {
    pub fn parsed(&self) -> Outcome<Vec<Budget>> {
        self.budgets.iter().map(|b| parse_budget(b)).collect()
    }
}

pub fn parse_budget(text: &str) -> Outcome<Budget> {
    match text.trim() {
        "1/|V|" => Ok(Budget::PerGraphDefault),
        t => match t.parse::<f64>() {
            Ok(0.0) => Ok(Budget::Unencoded),
            Ok(v) if v > 0.0 && v.is_finite() => Ok(Budget::Fixed(v)),
            _ => Err(Failure::config(format!("sweep.budgets: {text:?} is not 0, 1/|V| or a positive number"))),
        },
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SensitivityEmbedding {
    /// Shortest-path space of the graph itself.
    Apsp,
    /// Raw GNN embedding under a federated model.
    Gnn,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SensitivitySection {
    /// Both modes when unset.
    pub mode: Option<NeighborMode>,
    pub trials: usize,
    pub graphs: usize,
    pub embedding: SensitivityEmbedding,
}

impl Default for SensitivitySection {
    fn default() -> Self {
        SensitivitySection {
            mode: None,
            trials: 10,
            graphs: 50,
            embedding: SensitivityEmbedding::Apsp,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct MetricCompareSection {
    pub samples: usize,
    /// Largest graph the exact edit distance will enumerate.
    pub ged_cap: usize,
}

impl Default for MetricCompareSection {
    fn default() -> Self {
        MetricCompareSection {
            samples: 5,
            ged_cap: fedgw::downstream::DEFAULT_GED_CAP,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EncodeSection {
    pub input: Option<PathBuf>,
    pub alpha: f64,
    pub beta: f64,
}

impl Default for EncodeSection {
    fn default() -> Self {
        EncodeSection {
            input: None,
            alpha: 0.0,
            beta: 1.0,
        }
    }
}

/// Full experiment description. Every command reads the sections it needs.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExperimentConfig {
    /// Global seed; replaces the federation and solver seeds.
    pub seed: u64,
    pub out: PathBuf,
    /// Worker threads; 0 uses every core.
    pub workers: usize,
    /// Treat solver non-convergence as fatal.
    pub strict: bool,
    pub dataset: Option<DatasetSpec>,
    pub subgraphs: SubgraphSection,
    pub federation: FedConfig,
    pub train: TrainSection,
    pub solver: SolverConfig,
    pub ldp: LdpSection,
    pub distance: DistanceSection,
    pub classify: ClassifySection,
    pub cluster: ClusterSection,
    pub sweep: SweepSection,
    pub sensitivity: SensitivitySection,
    pub metric_compare: MetricCompareSection,
    pub encode: EncodeSection,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        ExperimentConfig {
            seed: 0,
            out: PathBuf::from("out"),
            workers: 0,
            strict: false,
            dataset: None,
            subgraphs: SubgraphSection::default(),
            federation: FedConfig::default(),
            train: TrainSection::default(),
            solver: SolverConfig::default(),
            ldp: LdpSection::default(),
            distance: DistanceSection::default(),
            classify: ClassifySection::default(),
            cluster: ClusterSection::default(),
            sweep: SweepSection::default(),
            sensitivity: SensitivitySection::default(),
            metric_compare: MetricCompareSection::default(),
            encode: EncodeSection::default(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, clap::ValueEnum)]
pub enum SolverChoice {
    /// Conditional gradient with exact transport steps.
    Cg,
    /// Proximal point with Sinkhorn steps.
    Ppa,
}

/// Values given on the command line; each one set wins over the file.
#[derive(Debug, Clone, Default)]
pub struct Overrides {
    pub seed: Option<u64>,
    pub out: Option<PathBuf>,
    pub workers: Option<usize>,
    pub strict: bool,
    pub epsilon: Option<f64>,
    pub m: Option<usize>,
    pub solver: Option<SolverChoice>,
    pub raw_mode: bool,
    pub input: Option<PathBuf>,
}

/// Read a TOML config, or the `config` object of a JSON run manifest.
pub fn load(path: &Path) -> Outcome<ExperimentConfig> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| Failure::config(format!("cannot read config {}: {e}", path.display())))?;
    let bad = |e: &dyn std::fmt::Display| Failure::config(format!("{}: {e}", path.display()));
    if path.extension().is_some_and(|x| x == "json") {
        let mut manifest: serde_json::Value = serde_json::from_str(&text).map_err(|e| bad(&e))?;
        let config = manifest
            .get_mut("config")
            .map(serde_json::Value::take)
            .ok_or_else(|| Failure::config(format!("{}: manifest has no config object", path.display())))?;
        serde_json::from_value(config).map_err(|e| bad(&e))
    } else {
        toml::from_str(&text).map_err(|e| bad(&e))
    }
}

impl ExperimentConfig {
    pub fn apply(&mut self, o: &Overrides) {
        if let Some(s) = o.seed {
            self.seed = s;
        }
        if let Some(p) = &o.out {
            self.out = p.clone();
        }
        if let Some(w) = o.workers {
            self.workers = w;
        }
        self.strict |= o.strict;
        if o.epsilon.is_some() {
            self.ldp.epsilon = o.epsilon;
        }
        if o.m.is_some() {
            self.ldp.m = o.m;
        }
        match o.solver {
            Some(SolverChoice::Cg) => {
                self.solver.method = Method::ConditionalGradient;
                self.solver.inner = InnerSolver::Exact;
            }
            Some(SolverChoice::Ppa) => {
                let p = SolverConfig::proximal();
                self.solver.method = p.method;
                self.solver.inner = p.inner;
                self.solver.inner_reg = p.inner_reg;
                self.solver.max_outer_iters = p.max_outer_iters;
            }
            None => {}
        }
        self.distance.raw_mode |= o.raw_mode;
        if o.input.is_some() {
            self.encode.input = o.input.clone();
        }
    }

    /// Push the global seed and the privacy overrides into the nested
    /// configs, then validate each section.
    pub fn resolve(mut self) -> Outcome<Self> {
        self.federation.seed = self.seed;
        self.solver.seed = self.seed;
        if let Some(e) = self.ldp.epsilon {
            self.federation.epsilon_policy = EpsilonPolicy::Fixed(e);
        }
        if let Some(m) = self.ldp.m {
            self.federation.cell_policy = CellPolicy::Fixed(m);
        }
        self.validate()?;
        Ok(self)
    }

    fn validate(&self) -> Outcome<()> {
        let at = |place: &'static str| move |e: fedgw::Error| Failure::config(format!("{place}: {e}"));
        self.federation.validate().map_err(at("federation"))?;
        self.solver.validate().map_err(at("solver"))?;
        if !(self.train.learning_rate > 0.0 && self.train.learning_rate.is_finite()) {
            return Err(Failure::config("train.learning_rate must be positive"));
        }
        if let Some(e) = self.ldp.epsilon {
            if !(e > 0.0 && e.is_finite()) {
                return Err(Failure::config(format!("ldp.epsilon {e} must be positive")));
            }
        }
        if self.ldp.m == Some(0) {
            return Err(Failure::config("ldp.m must be at least 1"));
        }
        if !(0.0..=1.0).contains(&self.distance.trade_off) {
            return Err(Failure::config("distance.trade_off must lie in [0, 1]"));
        }
        if self.subgraphs.hops == 0 || self.subgraphs.max_subgraphs == 0 {
            return Err(Failure::config("subgraphs.hops and subgraphs.max_subgraphs must be at least 1"));
        }
        if self.classify.folds == 0 || self.classify.knn_k == 0 {
            return Err(Failure::config("classify.folds and classify.knn_k must be at least 1"));
        }
        for (name, grid) in [("classify.c_grid", &self.classify.c_grid), ("classify.gamma_grid", &self.classify.gamma_grid)] {
            if let Some(g) = grid {
                if g.is_empty() || g.iter().any(|v| !(*v > 0.0 && v.is_finite())) {
                    return Err(Failure::config(format!("{name} must be a nonempty list of positive numbers")));
                }
            }
        }
        if self.cluster.k == Some(0) || self.cluster.max_iters == 0 {
            return Err(Failure::config("cluster.k and cluster.max_iters must be at least 1"));
        }
        self.sweep.parsed()?;
        if self.sweep.budgets.is_empty() || self.sweep.repeats == 0 {
            return Err(Failure::config("sweep needs at least one budget and one repeat"));
        }
        if self.sensitivity.trials == 0 || self.sensitivity.graphs == 0 {
            return Err(Failure::config("sensitivity.trials and sensitivity.graphs must be at least 1"));
        }
        if self.metric_compare.samples < 2 {
            return Err(Failure::config("metric_compare.samples must be at least 2"));
        }
        if !(self.encode.alpha < self.encode.beta) {
            return Err(Failure::config("encode.alpha must be below encode.beta"));
        }
        if let Some(d) = &self.dataset {
            d.validate()?;
        }
        Ok(())
    }
}

impl DatasetSpec {
    fn validate(&self) -> Outcome<()> {
        match self {
            DatasetSpec::Tu { path, name } => {
                if path.as_os_str().is_empty() {
                    return Err(Failure::config("dataset.path is empty"));
                }
                if name.is_empty() {
                    return Err(Failure::config("dataset.name is empty"));
                }
            }
            DatasetSpec::EdgeList { edges, .. } => {
                if edges.as_os_str().is_empty() {
                    return Err(Failure::config("dataset.edges is empty"));
                }
            }
            DatasetSpec::Citation(c) => {
                if c.nodes < 2 || c.classes == 0 || c.feature_dim == 0 {
                    return Err(Failure::config("dataset: citation needs nodes >= 2, classes >= 1, feature_dim >= 1"));
                }
            }
            DatasetSpec::Planted {
                per_class,
                min_nodes,
                max_nodes,
                ..
            } => {
                if *per_class == 0 || *min_nodes < 3 || max_nodes < min_nodes {
                    return Err(Failure::config("dataset: planted needs per_class >= 1 and 3 <= min_nodes <= max_nodes"));
                }
            }
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn empty_file_gives_defaults() {
        let c: ExperimentConfig = toml::from_str("").unwrap();
        assert_eq!(c, ExperimentConfig::default());
    }

    #[test]
    fn partial_sections_keep_other_defaults() {
        let c: ExperimentConfig = toml::from_str(
            "seed = 4\n[federation]\nrounds = 3\n[federation.model]\narchitecture = \"gcn\"\n[dataset]\nkind = \"tu\"\npath = \"d\"\nname = \"X\"\n",
        )
        .unwrap();
        assert_eq!(c.federation.rounds, 3);
        assert_eq!(c.federation.num_clients, FedConfig::default().num_clients);
        assert_eq!(c.federation.model.hidden_dim, 16);
        assert_eq!(c.dataset, Some(DatasetSpec::Tu { path: "d".into(), name: "X".into() }));
    }

    #[test]
    fn unknown_keys_are_rejected_with_their_name() {
        let err = toml::from_str::<ExperimentConfig>("[classify]\nfoldz = 3\n").unwrap_err();
        assert!(err.to_string().contains("foldz"), "{err}");
    }

    #[test]
    fn flags_beat_the_file() {
        let mut c: ExperimentConfig = toml::from_str("seed = 1\n[ldp]\nepsilon = 0.5\n").unwrap();
        c.apply(&Overrides {
            seed: Some(9),
            epsilon: Some(2.0),
            solver: Some(SolverChoice::Ppa),
            ..Overrides::default()
        });
        let c = c.resolve().unwrap();
        assert_eq!((c.seed, c.federation.seed, c.solver.seed), (9, 9, 9));
        assert_eq!(c.federation.epsilon_policy, EpsilonPolicy::Fixed(2.0));
        assert_eq!(c.solver.method, Method::ProximalPoint);
    }

    #[test]
    fn validation_names_the_field() {
        let mut c = ExperimentConfig::default();
        c.federation.rounds = 0;
        let err = c.resolve().unwrap_err();
        assert_eq!(err.code, crate::failure::CONFIG);
        assert!(err.message.starts_with("federation:"), "{}", err.message);
    }

    #[test]
    fn budgets_parse() {
        assert_eq!(parse_budget("0").unwrap(), Budget::Unencoded);
        assert_eq!(parse_budget("1/|V|").unwrap(), Budget::PerGraphDefault);
        assert_eq!(parse_budget("0.1").unwrap(), Budget::Fixed(0.1));
        assert!(parse_budget("-1").is_err());
    }
}
