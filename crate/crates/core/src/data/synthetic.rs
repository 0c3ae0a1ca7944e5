//! Seeded synthetic graphs for tests and demos.

use std::str::FromStr;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::dense::DenseMatrix;
use crate::error::{Error, Result};
use crate::graph::{Edge, GraphDataset};

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum SyntheticKind {
    ErdosRenyi,
    Path,
    Star,
    Complete,
}

impl FromStr for SyntheticKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "erdos_renyi" | "er" => Ok(SyntheticKind::ErdosRenyi),
            "path" => Ok(SyntheticKind::Path),
            "star" => Ok(SyntheticKind::Star),
            "complete" => Ok(SyntheticKind::Complete),
            _ => Err(Error::Config(format!("unknown synthetic graph kind '{s}'"))),
        }
    }
}

fn uniform_features(rng: &mut ChaCha8Rng, n: usize, dim: usize) -> Option<DenseMatrix> {
    (dim > 0).then(|| DenseMatrix::from_fn(n, dim, |_, _| rng.random::<f64>()))
}

/// Deterministic per `seed`. `p` is only used by `ErdosRenyi`; features are
/// uniform on `[0, 1)` and omitted when `feature_dim` is 0.
pub fn generate_synthetic(
    kind: SyntheticKind,
    n: usize,
    p: f64,
    feature_dim: usize,
    seed: u64,
) -> Result<GraphDataset> {
    if n == 0 {
        return Err(Error::Config("synthetic graphs need at least one node".into()));
    }
    if !(0.0..=1.0).contains(&p) {
        return Err(Error::Config(format!("edge probability {p} outside [0, 1]")));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let edges: Vec<Edge> = match kind {
        SyntheticKind::ErdosRenyi => {
            let mut e = Vec::new();
            for u in 0..n {
                for v in u + 1..n {
                    if rng.random::<f64>() < p {
                        e.push((u, v));
                    }
                }
            }
            e
        }
        SyntheticKind::Path => (1..n).map(|v| (v - 1, v)).collect(),
        SyntheticKind::Star => (1..n).map(|v| (0, v)).collect(),
        SyntheticKind::Complete => (0..n)
            .flat_map(|u| (u + 1..n).map(move |v| (u, v)))
            .collect(),
    };
    let features = uniform_features(&mut rng, n, feature_dim);
    let name = format!("{kind:?}-{n}").to_lowercase();
    GraphDataset::new(name, n, edges, features)
}

/// Community-structured graph with community-correlated binary features.
///
/// Nodes are split into `communities` contiguous blocks. Pairs inside a block
/// connect with probability `p_in`, across blocks with `p_out`. Every block
/// owns a random subset of the feature columns; a node switches on each of its
/// block's columns with probability 0.3 and any other column with probability
/// 0.02, so features carry signal about which edges exist.
pub fn planted_partition(
    n: usize,
    communities: usize,
    p_in: f64,
    p_out: f64,
    feature_dim: usize,
    seed: u64,
) -> Result<GraphDataset> {
    if n == 0 || communities == 0 || communities > n {
        return Err(Error::Config(format!(
            "need 1 <= communities <= n, got {communities} communities for {n} nodes"
        )));
    }
    for p in [p_in, p_out] {
        if !(0.0..=1.0).contains(&p) {
            return Err(Error::Config(format!("edge probability {p} outside [0, 1]")));
        }
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let block = |v: usize| v * communities / n;
    let mut edges = Vec::new();
    for u in 0..n {
        for v in u + 1..n {
            let p = if block(u) == block(v) { p_in } else { p_out };
            if rng.random::<f64>() < p {
                edges.push((u, v));
            }
        }
    }
    let features = (feature_dim > 0).then(|| {
        let owner: Vec<usize> = (0..feature_dim)
            .map(|_| rng.random_range(0..communities as u64) as usize)
            .collect();
        DenseMatrix::from_fn(n, feature_dim, |v, f| {
            let p = if owner[f] == block(v) { 0.3 } else { 0.02 };
            if rng.random::<f64>() < p {
                1.0
            } else {
                0.0
            }
        })
    });
    GraphDataset::new(format!("planted-{n}-{communities}"), n, edges, features)
}
