mod common;

use common::{dense_matmul, graph_strategy, random_dense};
use lgae::graph::{adjacency_from_edges, degrees, normalized_operator};
use lgae::{DenseMatrix, GraphDataset, SparseMatrix};
use proptest::prelude::*;
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn operator(g: &GraphDataset) -> SparseMatrix {
    normalized_operator(&adjacency_from_edges(g).unwrap()).unwrap()
}

proptest! {
    #[test]
    fn operator_is_exactly_symmetric(g in graph_strategy(50, 0)) {
        let s = operator(&g);
        for i in 0..s.n_rows() {
            for (j, v) in s.row(i) {
                prop_assert_eq!(v.to_bits(), s.get(j, i).to_bits());
            }
        }
    }

    #[test]
    fn operator_entries_follow_degree_formula(g in graph_strategy(50, 0)) {
        let a = adjacency_from_edges(&g).unwrap();
        let s = normalized_operator(&a).unwrap();
        let d = degrees(&a).unwrap();
        for i in 0..s.n_rows() {
            for (j, v) in s.row(i) {
                let a_tilde = a.get(i, j) + if i == j { 1.0 } else { 0.0 };
                let expected = a_tilde / ((d[i] + 1.0) * (d[j] + 1.0)).sqrt();
                prop_assert!((v - expected).abs() < 1e-12);
            }
        }
        // every edge and every diagonal entry is stored
        prop_assert_eq!(s.nnz(), 2 * g.num_edges() + g.num_nodes());
    }

    #[test]
    fn spmm_matches_dense_product(g in graph_strategy(50, 0), cols in 1usize..6, seed in any::<u64>()) {
        let s = operator(&g);
        let x = random_dense(g.num_nodes(), cols, seed);
        let sparse = s.spmm(&x).unwrap();
        let dense = dense_matmul(&s.to_dense(), &x);
        prop_assert!(sparse.max_abs_diff(&dense) < 1e-12);
    }

    #[test]
    fn operator_is_permutation_equivariant(g in graph_strategy(40, 0), seed in any::<u64>()) {
        let n = g.num_nodes();
        let mut perm: Vec<usize> = (0..n).collect();
        perm.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
        let permuted = g.with_edges(g.edges().iter().map(|&(u, v)| (perm[u], perm[v]))).unwrap();
        let s = operator(&g).to_dense();
        let sp = operator(&permuted).to_dense();
        for i in 0..n {
            for j in 0..n {
                prop_assert_eq!(sp.get(perm[i], perm[j]).to_bits(), s.get(i, j).to_bits());
            }
        }
    }
}

#[test]
fn spmm_rejects_mismatched_shapes() {
    let s = SparseMatrix::identity(3);
    assert!(s.spmm(&DenseMatrix::zeros(4, 2)).is_err());
}
