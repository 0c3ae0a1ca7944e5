#![allow(dead_code)]

use lgae::data::{generate_synthetic, SyntheticKind};
use lgae::graph::{adjacency_from_edges, normalized_operator};
use lgae::models::{forward, ModelConfig, ModelParams, ReconstructionTarget};
use lgae::propagation::{propagate, FeatureInput};
use lgae::training::{loss_parts, Objective};
use lgae::{DenseMatrix, GraphDataset, SparseMatrix, Variant};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub const FD_STEP: f64 = 1e-5;
pub const FD_REL_TOL: f64 = 1e-4;
/// Relative errors are taken against max(|analytic|, |numeric|, this floor).
pub const FD_DENOM_FLOOR: f64 = 1e-6;

pub struct Problem {
    pub graph: GraphDataset,
    pub a: SparseMatrix,
    pub s: SparseMatrix,
    pub x: FeatureInput,
    pub propagation: Option<SparseMatrix>,
    pub params: ModelParams,
    pub noise: Option<DenseMatrix>,
}

/// A random connected-ish graph with random features and params for `variant`.
pub fn random_problem(variant: Variant, seed: u64) -> Problem {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let n = rng.random_range(4..=20);
    let d = rng.random_range(1..=8);
    let k = rng.random_range(1..=3);
    let mut graph = generate_synthetic(SyntheticKind::ErdosRenyi, n, 0.3, d, seed).unwrap();
    if graph.num_edges() == 0 {
        graph = graph.with_edges([(0, 1)]).unwrap();
    }
    let a = adjacency_from_edges(&graph).unwrap();
    let s = normalized_operator(&a).unwrap();
    let raw = graph.features().unwrap().clone();
    let (x, propagation) = if variant.is_linear() {
        (FeatureInput::Dense(propagate(&s, &raw, k).unwrap()), None)
    } else {
        (FeatureInput::Dense(raw), Some(s.clone()))
    };
    let mut cfg = ModelConfig::new(variant, d, k, seed).unwrap();
    if !variant.is_linear() {
        // Narrow layers keep the check fast; shapes still chain through k layers.
        cfg.hidden_dims = (0..k).map(|i| 3 + k - i).collect();
    } else {
        cfg.hidden_dims = vec![6, 4];
    }
    let mut params = ModelParams::init(&cfg).unwrap();
    // Non-zero biases so their gradients are exercised away from the init point.
    for layer in params.layers.iter_mut().chain(params.log_sigma.as_mut()) {
        if let Some(b) = layer.bias.as_mut() {
            for v in b.iter_mut() {
                *v = rng.random_range(-0.3..0.3);
            }
        }
        for v in layer.weight.as_mut_slice() {
            *v *= 1.5;
        }
    }
    let noise = variant.is_variational().then(|| {
        DenseMatrix::from_fn(n, params.latent_dim(), |_, _| rng.random_range(-1.5..1.5))
    });
    Problem {
        graph,
        a,
        s,
        x,
        propagation,
        params,
        noise,
    }
}

pub fn total_loss(p: &Problem, params: &ModelParams) -> f64 {
    let target = ReconstructionTarget::new(&p.a).unwrap();
    let cache = forward(&p.x, p.propagation.as_ref(), params, p.noise.as_ref()).unwrap();
    loss_parts(&cache, &target).unwrap().total(&Objective::default())
}

/// Largest relative error between analytic and central-difference gradients,
/// with the name of the tensor where it occurs.
pub fn max_gradient_error(p: &Problem) -> (f64, String) {
    let target = ReconstructionTarget::new(&p.a).unwrap();
    let (_, grads) = lgae::training::loss_and_grad(
        &p.x,
        p.propagation.as_ref(),
        &p.params,
        p.noise.as_ref(),
        &target,
        &Objective::default(),
    )
    .unwrap();
    let analytic: Vec<(String, Vec<f64>)> = grads
        .tensors()
        .iter()
        .map(|t| (t.name.clone(), t.data.to_vec()))
        .collect();
    let mut worst = (0.0, String::new());
    let n_tensors = analytic.len();
    for ti in 0..n_tensors {
        let len = analytic[ti].1.len();
        for i in 0..len {
            let mut plus = p.params.clone();
            plus.tensors_mut()[ti][i] += FD_STEP;
            let mut minus = p.params.clone();
            minus.tensors_mut()[ti][i] -= FD_STEP;
            let numeric = (total_loss(p, &plus) - total_loss(p, &minus)) / (2.0 * FD_STEP);
            let a = analytic[ti].1[i];
            let rel = (a - numeric).abs() / a.abs().max(numeric.abs()).max(FD_DENOM_FLOOR);
            if rel > worst.0 {
                worst = (rel, format!("{}[{i}]: analytic {a:e}, numeric {numeric:e}", analytic[ti].0));
            }
        }
    }
    worst
}

/// Random simple graph with `1..=max_n` nodes and edge density `p`.
pub fn graph_strategy(
    max_n: usize,
    feature_dim: usize,
) -> impl proptest::strategy::Strategy<Value = GraphDataset> {
    use proptest::prelude::*;
    (1..=max_n, 0.0f64..0.5, any::<u64>()).prop_map(move |(n, p, seed)| {
        generate_synthetic(SyntheticKind::ErdosRenyi, n, p, feature_dim, seed).unwrap()
    })
}

/// Connected graph: a random spanning tree plus Erdős–Rényi extras.
pub fn connected_graph(n: usize, p: f64, feature_dim: usize, seed: u64) -> GraphDataset {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let base = generate_synthetic(SyntheticKind::ErdosRenyi, n, p, feature_dim, seed).unwrap();
    let mut edges = base.edges().to_vec();
    for v in 1..n {
        edges.push((rng.random_range(0..v), v));
    }
    base.with_edges(edges).unwrap()
}

pub fn dense_matmul(a: &DenseMatrix, b: &DenseMatrix) -> DenseMatrix {
    DenseMatrix::from_fn(a.n_rows(), b.n_cols(), |i, j| {
        (0..a.n_cols()).map(|p| a.get(i, p) * b.get(p, j)).sum()
    })
}

pub fn random_dense(rows: usize, cols: usize, seed: u64) -> DenseMatrix {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    DenseMatrix::from_fn(rows, cols, |_, _| rng.random_range(-1.0..1.0))
}

/// Pairwise Mann-Whitney count: 2 per correctly ordered pair, 1 per tie.
pub fn auc_oracle(pos: &[f64], neg: &[f64]) -> f64 {
    let mut twice: u64 = 0;
    for p in pos {
        for q in neg {
            twice += if p > q {
                2
            } else if p == q {
                1
            } else {
                0
            };
        }
    }
    twice as f64 / (2 * pos.len() * neg.len()) as f64
}

/// Precision at each positive's rank, with every tied negative ranked ahead of
/// it and tied positives in input order, summed in rank order.
pub fn ap_oracle(pos: &[f64], neg: &[f64]) -> f64 {
    let mut at_rank: Vec<(usize, f64)> = pos
        .iter()
        .enumerate()
        .map(|(idx, &s)| {
            let pos_above = pos.iter().filter(|&&t| t > s).count();
            let pos_tied_before = pos[..idx].iter().filter(|&&t| t == s).count();
            let neg_at_or_above = neg.iter().filter(|&&t| t >= s).count();
            let hits = pos_above + pos_tied_before + 1;
            let rank = hits + neg_at_or_above;
            (rank, hits as f64 / rank as f64)
        })
        .collect();
    at_rank.sort_by_key(|&(rank, _)| rank);
    at_rank.iter().map(|&(_, p)| p).sum::<f64>() / pos.len() as f64
}
