use std::path::Path;
use std::process::{Command, Output};

use serde_json::Value;

fn fedgw(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_fedgw"))
        .args(args)
        .env("RUST_LOG", "warn")
        .output()
        .expect("binary runs")
}

fn code(out: &Output) -> i32 {
    out.status.code().expect("exited normally")
}

fn config(dir: &Path, body: &str) -> String {
    let path = dir.join("run.toml");
    std::fs::write(&path, format!("out = {:?}\n{body}", dir.join("out"))).unwrap();
    path.display().to_string()
}

fn manifest(dir: &Path) -> Value {
    serde_json::from_str(&std::fs::read_to_string(dir.join("out/manifest.json")).unwrap()).unwrap()
}

fn matrix(path: &Path) -> Vec<Vec<f64>> {
    std::fs::read_to_string(path)
        .unwrap()
        .lines()
        .map(|l| l.split(',').map(|v| v.parse().unwrap()).collect())
        .collect()
}

const SMALL_FED: &str = "[federation]\nrounds = 2\nnum_clients = 2\nlocal_epochs = 1\n[federation.model]\narchitecture = \"gcn\"\nhidden_dim = 4\n[solver]\nexhaustive_anchor_limit = 0\n";

#[test]
fn empty_dataset_path_is_a_config_error() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = config(dir.path(), "[dataset]\nkind = \"tu\"\npath = \"\"\nname = \"MUTAG\"\n");
    let out = fedgw(&["classify", "--config", &cfg, "--raw-mode"]);
    assert_eq!(code(&out), 2, "{}", String::from_utf8_lossy(&out.stderr));
}

#[test]
fn missing_dataset_files_are_a_data_error() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = config(dir.path(), "[dataset]\nkind = \"tu\"\npath = \"/nonexistent\"\nname = \"MUTAG\"\n");
    let out = fedgw(&["classify", "--config", &cfg, "--raw-mode"]);
    assert_eq!(code(&out), 3, "{}", String::from_utf8_lossy(&out.stderr));
}

#[test]
fn unknown_keys_and_flags_are_config_errors() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = config(dir.path(), "[classify]\nfoldz = 3\n");
    let out = fedgw(&["classify", "--config", &cfg]);
    assert_eq!(code(&out), 2);
    assert!(String::from_utf8_lossy(&out.stderr).contains("foldz"));
    assert_eq!(code(&fedgw(&["classify", "--no-such-flag"])), 2);
    assert_eq!(code(&fedgw(&["classify", "--solver", "lbfgs"])), 2);
}

#[test]
fn planted_shapes_classify_almost_perfectly() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = config(
        dir.path(),
        "seed = 3\n[dataset]\nkind = \"planted\"\nper_class = 15\nmin_nodes = 5\nmax_nodes = 8\nseed = 1\n[classify]\nfolds = 5\n",
    );
    let out = fedgw(&["classify", "--config", &cfg, "--raw-mode"]);
    assert_eq!(code(&out), 0, "{}", String::from_utf8_lossy(&out.stderr));
    let m = manifest(dir.path());
    let accuracy = m["report"]["cv"]["mean_accuracy"].as_f64().unwrap();
    assert!(accuracy >= 0.95, "accuracy {accuracy}");
    let d = matrix(&dir.path().join("out/distances.csv"));
    assert_eq!(d.len(), 30);
}

#[test]
fn knn_classifier_runs_on_the_same_matrix() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = config(
        dir.path(),
        "[dataset]\nkind = \"planted\"\nper_class = 10\nmin_nodes = 5\nmax_nodes = 7\nseed = 2\n[classify]\nclassifier = \"knn\"\nfolds = 3\n",
    );
    let out = fedgw(&["classify", "--config", &cfg, "--raw-mode"]);
    assert_eq!(code(&out), 0, "{}", String::from_utf8_lossy(&out.stderr));
    assert!(manifest(dir.path())["report"]["cv"]["mean_accuracy"].as_f64().unwrap() >= 0.95);
}

#[test]
fn metric_compare_writes_four_symmetric_matrices() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = config(
        dir.path(),
        &format!("[dataset]\nkind = \"citation\"\nnodes = 120\nseed = 4\n[subgraphs]\nmax_subgraphs = 20\n[metric_compare]\nsamples = 5\n{SMALL_FED}"),
    );
    let out = fedgw(&["metric-compare", "--config", &cfg]);
    assert_eq!(code(&out), 0, "{}", String::from_utf8_lossy(&out.stderr));
    for name in ["ged", "gw_a", "fgw_ax", "gw_h"] {
        let m = matrix(&dir.path().join(format!("out/{name}.csv")));
        assert_eq!(m.len(), 5, "{name}");
        for i in 0..5 {
            assert_eq!(m[i].len(), 5);
            assert_eq!(m[i][i], 0.0, "{name} diagonal");
            for j in 0..5 {
                assert!(m[i][j] == m[j][i] || (m[i][j].is_nan() && m[j][i].is_nan()), "{name} symmetry");
            }
        }
    }
}

#[test]
fn one_edge_graph_gives_one_edge_sensitivity_value() {
    let dir = tempfile::tempdir().unwrap();
    std::fs::write(dir.path().join("edges.txt"), "0 1\n").unwrap();
    std::fs::write(dir.path().join("labels.txt"), "0\n1\n").unwrap();
    let cfg = config(
        dir.path(),
        &format!(
            "[dataset]\nkind = \"edge_list\"\nedges = {:?}\nlabels = {:?}\n[sensitivity]\nmode = \"edge\"\ntrials = 1\ngraphs = 1\n",
            dir.path().join("edges.txt"),
            dir.path().join("labels.txt")
        ),
    );
    let out = fedgw(&["sensitivity", "--config", &cfg]);
    assert_eq!(code(&out), 0, "{}", String::from_utf8_lossy(&out.stderr));
    let table = std::fs::read_to_string(dir.path().join("out/sensitivity.csv")).unwrap();
    let rows: Vec<&str> = table.lines().skip(1).collect();
    assert_eq!(rows.len(), 1);
    assert!(rows[0].starts_with("0,edge,0,"));
}

#[test]
fn cluster_reruns_are_identical_including_from_the_manifest() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = config(
        dir.path(),
        &format!("seed = 8\n[dataset]\nkind = \"citation\"\nnodes = 90\nclasses = 3\nseed = 2\n[subgraphs]\nmax_subgraphs = 12\n[cluster]\nmax_iters = 5\n{SMALL_FED}"),
    );
    let files = ["assignments.csv", "mds.csv", "distances.csv", "manifest.json"];
    let read = |d: &Path| files.map(|f| std::fs::read(d.join(f)).unwrap());

    assert_eq!(code(&fedgw(&["cluster", "--config", &cfg])), 0);
    let first = read(&dir.path().join("out"));
    assert_eq!(code(&fedgw(&["cluster", "--config", &cfg])), 0);
    assert_eq!(read(&dir.path().join("out")), first);
    // the manifest records the worker count; results must not depend on it
    assert_eq!(code(&fedgw(&["cluster", "--config", &cfg, "--workers", "2"])), 0);
    assert_eq!(read(&dir.path().join("out"))[..3], first[..3]);

    let again = dir.path().join("again");
    let from = dir.path().join("out/manifest.json").display().to_string();
    let out = fedgw(&["cluster", "--config", &from, "--out", again.to_str().unwrap()]);
    assert_eq!(code(&out), 0, "{}", String::from_utf8_lossy(&out.stderr));
    let rerun = read(&again);
    assert_eq!(rerun[..3], first[..3]);
    let m = manifest(dir.path());
    assert_eq!(m["report"]["k"], 3);
    assert!(m["federation"]["releases"].as_array().is_some_and(|r| r.len() == 12));
}

#[test]
fn flags_override_the_file() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = config(
        dir.path(),
        "seed = 1\n[ldp]\nepsilon = 0.5\n[dataset]\nkind = \"planted\"\nper_class = 6\nmin_nodes = 4\nmax_nodes = 5\nseed = 1\n[classify]\nfolds = 2\n",
    );
    let out = fedgw(&["classify", "--config", &cfg, "--raw-mode", "--seed", "5", "--epsilon", "3", "--solver", "ppa"]);
    assert_eq!(code(&out), 0, "{}", String::from_utf8_lossy(&out.stderr));
    let c = &manifest(dir.path())["config"];
    assert_eq!(c["seed"], 5);
    assert_eq!(c["federation"]["seed"], 5);
    assert_eq!(c["ldp"]["epsilon"], 3.0);
    assert_eq!(c["solver"]["method"], "proximal_point");
    assert_eq!(c["distance"]["raw_mode"], true);
}

#[test]
fn strict_mode_turns_non_convergence_into_exit_4() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = config(
        dir.path(),
        "[dataset]\nkind = \"planted\"\nper_class = 6\nmin_nodes = 5\nmax_nodes = 8\nseed = 1\n[classify]\nfolds = 2\n[solver]\nmax_outer_iters = 1\nexhaustive_anchor_limit = 0\n",
    );
    assert_eq!(code(&fedgw(&["classify", "--config", &cfg, "--raw-mode"])), 0);
    let out = fedgw(&["classify", "--config", &cfg, "--raw-mode", "--strict"]);
    assert_eq!(code(&out), 4, "{}", String::from_utf8_lossy(&out.stderr));
    assert!(dir.path().join("out/manifest.json").exists());
}

#[test]
fn encode_releases_m_cells_per_row() {
    let dir = tempfile::tempdir().unwrap();
    let input = dir.path().join("h.csv");
    std::fs::write(&input, "0.1,0.9,0.5\n0.3,0.3,0.4\n1.0,0.0,0.2\n0.6,0.6,0.6\n").unwrap();
    let out_dir = dir.path().join("enc");
    let out = fedgw(&[
        "encode",
        "--input",
        input.to_str().unwrap(),
        "--epsilon",
        "5",
        "--m",
        "2",
        "--out",
        out_dir.to_str().unwrap(),
    ]);
    assert_eq!(code(&out), 0, "{}", String::from_utf8_lossy(&out.stderr));
    let text = std::fs::read_to_string(out_dir.join("encoded.csv")).unwrap();
    let mut lines = text.lines();
    assert!(lines.next().unwrap().contains("epsilon=5"));
    let rows: Vec<Vec<i8>> = lines.map(|l| l.split(',').map(|v| v.parse().unwrap()).collect()).collect();
    assert_eq!(rows.len(), 4);
    assert!(rows.iter().all(|r| r.iter().filter(|&&v| v != 0).count() == 2));

    let bad = dir.path().join("bad.csv");
    std::fs::write(&bad, "0.1,x\n").unwrap();
    assert_eq!(code(&fedgw(&["encode", "--input", bad.to_str().unwrap(), "--out", out_dir.to_str().unwrap()])), 3);
    assert_eq!(code(&fedgw(&["encode", "--out", out_dir.to_str().unwrap()])), 2);
}

#[test]
fn sweep_writes_one_row_per_budget() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = config(
        dir.path(),
        &format!("[dataset]\nkind = \"citation\"\nnodes = 90\nseed = 6\n[subgraphs]\nmax_subgraphs = 6\n[sweep]\nbudgets = [\"0\", \"1/|V|\", \"2\"]\nrepeats = 2\n{SMALL_FED}"),
    );
    let out = fedgw(&["sweep", "--config", &cfg]);
    assert_eq!(code(&out), 0, "{}", String::from_utf8_lossy(&out.stderr));
    let table = std::fs::read_to_string(dir.path().join("out/sweep.csv")).unwrap();
    let lines: Vec<&str> = table.lines().collect();
    assert_eq!(lines[0], "epsilon,mean,std,pairs,unconverged");
    assert_eq!(lines.len(), 4);
    assert!(lines[1].starts_with("0,") && lines[2].starts_with("1/|V|,") && lines[3].starts_with("2,"));
}
