mod common;

use std::fs;

use common::graph_strategy;
use lgae::data::{
    build_manifest, generate_synthetic, load_dataset, save_dataset, SyntheticKind, EDGES_FILE,
    FEATURES_FILE,
};
use lgae::Error;
use proptest::prelude::*;

proptest! {
    #![proptest_config(ProptestConfig::with_cases(40))]

    #[test]
    fn save_then_load_round_trips(g in graph_strategy(40, 3), featureless in any::<bool>()) {
        let g = if featureless {
            lgae::GraphDataset::new(g.name.clone(), g.num_nodes(), g.edges().iter().copied(), None).unwrap()
        } else {
            g
        };
        let dir = tempfile::tempdir().unwrap();
        let manifest = save_dataset(&g, dir.path()).unwrap();
        let back = load_dataset(dir.path()).unwrap();
        prop_assert_eq!(&back, &g);
        let again = tempfile::tempdir().unwrap();
        prop_assert_eq!(save_dataset(&back, again.path()).unwrap(), manifest);
    }
}

/// `P(X <= x)` for `X ~ Binomial(n, p)`, summed from the pmf in log space.
fn binomial_cdf(n: u64, p: f64, x: u64) -> f64 {
    let ln_choose = |k: u64| -> f64 {
        (1..=k).map(|i| ((n - k + i) as f64).ln() - (i as f64).ln()).sum()
    };
    (0..=x)
        .map(|k| (ln_choose(k) + k as f64 * p.ln() + (n - k) as f64 * (1.0 - p).ln()).exp())
        .sum()
}

#[test]
fn erdos_renyi_edge_counts_follow_the_binomial() {
    let (n, p) = (30usize, 0.2);
    let pairs = (n * (n - 1) / 2) as u64;
    let lo = (0..=pairs).find(|&x| binomial_cdf(pairs, p, x) >= 0.005).unwrap();
    let hi = (0..=pairs).find(|&x| binomial_cdf(pairs, p, x) >= 0.995).unwrap();
    let inside = (0..100)
        .filter(|&seed| {
            let m = generate_synthetic(SyntheticKind::ErdosRenyi, n, p, 0, seed).unwrap().num_edges() as u64;
            (lo..=hi).contains(&m)
        })
        .count();
    // about one seed in a hundred is expected to land outside
    assert!(inside >= 95, "{inside}/100 seeds within [{lo}, {hi}]");
}

#[test]
fn fixed_shapes_have_expected_edges() {
    let path = generate_synthetic(SyntheticKind::Path, 6, 0.0, 0, 0).unwrap();
    assert_eq!(path.edges(), &[(0, 1), (1, 2), (2, 3), (3, 4), (4, 5)]);
    let star = generate_synthetic(SyntheticKind::Star, 5, 0.0, 0, 0).unwrap();
    assert!(star.edges().iter().all(|&(u, _)| u == 0) && star.num_edges() == 4);
    let complete = generate_synthetic(SyntheticKind::Complete, 7, 0.0, 2, 0).unwrap();
    assert_eq!(complete.num_edges(), 21);
    assert_eq!(complete.feature_dim(), 2);
}

#[test]
fn hand_written_files_are_canonicalised() {
    let dir = tempfile::tempdir().unwrap();
    fs::write(dir.path().join(EDGES_FILE), "2 0\n0 2\n1 0\n\n3 1\n").unwrap();
    fs::write(dir.path().join(FEATURES_FILE), "1 0\n0 1\n0.5 0.5\n0 0\n").unwrap();
    let manifest = build_manifest(dir.path(), "tiny", 4).unwrap();
    assert_eq!((manifest.num_edges, manifest.feature_dim), (3, 2));
    let g = load_dataset(dir.path()).unwrap();
    assert_eq!(g.edges(), &[(0, 1), (0, 2), (1, 3)]);
    assert_eq!(g.features().unwrap().get(2, 1), 0.5);
}

#[test]
fn tampered_files_fail_integrity_checks() {
    let g = generate_synthetic(SyntheticKind::ErdosRenyi, 15, 0.3, 2, 3).unwrap();
    let dir = tempfile::tempdir().unwrap();
    save_dataset(&g, dir.path()).unwrap();
    let edges = dir.path().join(EDGES_FILE);
    let mut text = fs::read_to_string(&edges).unwrap();
    text.push_str("0 14\n");
    fs::write(&edges, text).unwrap();
    assert!(matches!(load_dataset(dir.path()), Err(Error::Integrity(_))));
}

#[test]
fn self_loops_and_out_of_range_nodes_are_rejected() {
    for bad in ["0 0\n", "0 9\n"] {
        let dir = tempfile::tempdir().unwrap();
        fs::write(dir.path().join(EDGES_FILE), bad).unwrap();
        let err = build_manifest(dir.path(), "bad", 3).unwrap_err();
        assert!(matches!(err, Error::MalformedDataset(_)), "{bad:?}: {err}");
    }
}
