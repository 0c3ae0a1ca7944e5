use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use lgae::data::load_dataset;
use lgae::graph::{adjacency_from_edges, normalized_operator};
use lgae::propagation::{propagate, read_cache};

fn lgae(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_lgae")).args(args).output().unwrap()
}

fn ok(args: &[&str]) -> String {
    let out = lgae(args);
    assert!(
        out.status.success(),
        "{args:?} failed: {}",
        String::from_utf8_lossy(&out.stderr)
    );
    String::from_utf8(out.stdout).unwrap()
}

fn p(path: &Path) -> &str {
    path.to_str().unwrap()
}

fn generate(dir: &Path, kind: &str, n: usize, feature_dim: usize) -> PathBuf {
    let data = dir.join(format!("{kind}-{n}"));
    ok(&[
        "generate", "--kind", kind, "--n", &n.to_string(), "--p", "0.15",
        "--feature-dim", &feature_dim.to_string(), "--seed", "4", "--out", p(&data),
    ]);
    data
}

/// Path printed by `preprocess` as "wrote <path> (r x c) ...".
fn preprocess(data: &Path, k: usize, featureless: bool, out: &Path) -> PathBuf {
    let k = k.to_string();
    let mut args = vec!["preprocess", "--dataset", p(data), "--k", &k, "--out", p(out)];
    if featureless {
        args.push("--featureless");
    }
    let stdout = ok(&args);
    let rest = stdout.strip_prefix("wrote ").unwrap();
    PathBuf::from(&rest[..rest.find(" (").unwrap()])
}

#[test]
fn usage_errors_exit_with_two() {
    let out = lgae(&["train", "--variant", "sgae", "--dataset", "x"]);
    assert_eq!(out.status.code(), Some(2));
    let out = lgae(&["frobnicate"]);
    assert_eq!(out.status.code(), Some(2));
    let out = lgae(&["train", "--dataset", "x", "--test-frac", "0"]);
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn missing_dataset_is_a_runtime_failure() {
    let dir = tempfile::tempdir().unwrap();
    let out = lgae(&["train", "--dataset", p(&dir.path().join("none")), "--out", p(&dir.path().join("o"))]);
    assert_eq!(out.status.code(), Some(1));
}

#[test]
fn preprocess_matches_in_process_propagation() {
    let dir = tempfile::tempdir().unwrap();
    let data = generate(dir.path(), "erdos_renyi", 40, 6);
    let g = load_dataset(&data).unwrap();
    let s = normalized_operator(&adjacency_from_edges(&g).unwrap()).unwrap();
    let x = g.features().unwrap();

    let raw = read_cache(&preprocess(&data, 0, false, &dir.path().join("c"))).unwrap();
    assert_eq!(&raw, x);
    let two = read_cache(&preprocess(&data, 2, false, &dir.path().join("c"))).unwrap();
    assert_eq!(two, propagate(&s, x, 2).unwrap());
}

#[test]
fn featureless_one_hop_cache_is_the_operator() {
    let dir = tempfile::tempdir().unwrap();
    let data = generate(dir.path(), "path", 5, 0);
    let g = load_dataset(&data).unwrap();
    let s = normalized_operator(&adjacency_from_edges(&g).unwrap()).unwrap();
    let cache = read_cache(&preprocess(&data, 1, true, &dir.path().join("c"))).unwrap();
    assert_eq!(cache, s.to_dense());
}

#[test]
fn params_table_lists_the_linear_constant() {
    let out = ok(&["params", "--feature-dim", "1433"]);
    assert!(out.contains("46416"));
    assert!(out.contains("note: VGAE k=2"));
    let json = ok(&["params", "--feature-dim", "500", "--variant", "vgae", "--json"]);
    assert!(json.contains("35072"));
}

fn train_args<'a>(data: &'a str, out: &'a str) -> Vec<&'a str> {
    vec![
        "train", "--dataset", data, "--variant", "lvgae", "--epochs", "15", "--seeds", "0-2",
        "--val-frac", "0.1", "--test-frac", "0.2", "--eval-every", "5", "--out", out,
    ]
}

#[test]
fn training_twice_writes_identical_files() {
    let dir = tempfile::tempdir().unwrap();
    let data = generate(dir.path(), "erdos_renyi", 40, 5);
    let (a, b) = (dir.path().join("a"), dir.path().join("b"));
    ok(&train_args(p(&data), p(&a)));
    ok(&train_args(p(&data), p(&b)));

    let mut files = vec!["config.txt".to_string(), "split.txt".into(), "aggregate.json".into()];
    for s in 0..3 {
        files.push(format!("seed-{s}/report.json"));
        files.push(format!("seed-{s}/checkpoint.bin"));
    }
    for f in &files {
        let (x, y) = (fs::read(a.join(f)).unwrap(), fs::read(b.join(f)).unwrap());
        assert!(!x.is_empty(), "{f} empty");
        // config.txt names its own output directory
        if f != "config.txt" {
            assert_eq!(x, y, "{f} differs");
        }
    }
    let agg: serde_json::Value = serde_json::from_slice(&fs::read(a.join("aggregate.json")).unwrap()).unwrap();
    assert_eq!(agg["runs"].as_array().unwrap().len(), 3);
    assert_eq!(agg["std_kind"], "population");
    assert!(agg["auc_mean"].as_f64().unwrap() > 0.0);
}

#[test]
fn recorded_config_reruns_identically() {
    let dir = tempfile::tempdir().unwrap();
    let data = generate(dir.path(), "erdos_renyi", 30, 3);
    let first = dir.path().join("first");
    ok(&train_args(p(&data), p(&first)));
    let second = dir.path().join("second");
    ok(&["train", "--config", p(&first.join("config.txt")), "--out", p(&second)]);
    for f in ["aggregate.json", "split.txt", "seed-1/checkpoint.bin"] {
        assert_eq!(fs::read(first.join(f)).unwrap(), fs::read(second.join(f)).unwrap(), "{f}");
    }
}

#[test]
fn flags_override_config_file() {
    let dir = tempfile::tempdir().unwrap();
    let data = generate(dir.path(), "erdos_renyi", 30, 3);
    let cfg = dir.path().join("run.txt");
    fs::write(&cfg, format!("dataset={}\nvariant=gae\nepochs=3\nseeds=0\n", p(&data))).unwrap();
    let out = dir.path().join("o");
    ok(&["train", "--config", p(&cfg), "--variant", "lgae", "--out", p(&out)]);
    let resolved = fs::read_to_string(out.join("config.txt")).unwrap();
    assert!(resolved.contains("variant=lgae"), "{resolved}");
    assert!(resolved.contains("epochs=3"));
}
