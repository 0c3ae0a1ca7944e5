//! Undirected graphs, adjacency construction and the renormalized propagation
//! operator `S = D̃^{-1/2} (A + I) D̃^{-1/2}`.

use std::collections::BTreeSet;

use crate::dense::DenseMatrix;
use crate::error::{Error, Result};
use crate::sparse::SparseMatrix;

/// An undirected node pair stored with `u < v`.
pub type Edge = (usize, usize);

/// A graph with optional dense node features.
#[derive(Clone, Debug, PartialEq)]
pub struct GraphDataset {
    pub name: String,
    num_nodes: usize,
    edges: Vec<Edge>,
    features: Option<DenseMatrix>,
}

impl GraphDataset {
    /// Canonicalizes `edges` to sorted, deduplicated `(min, max)` pairs.
    /// Self-loops and out-of-range endpoints are rejected.
    pub fn new(
        name: impl Into<String>,
        num_nodes: usize,
        edges: impl IntoIterator<Item = Edge>,
        features: Option<DenseMatrix>,
    ) -> Result<Self> {
        let mut set = BTreeSet::new();
        for (u, v) in edges {
            if u >= num_nodes || v >= num_nodes {
                return Err(Error::MalformedDataset(format!(
                    "edge ({u}, {v}) references a node outside 0..{num_nodes}"
                )));
            }
            if u == v {
                return Err(Error::MalformedDataset(format!("self-loop on node {u}")));
            }
            set.insert((u.min(v), u.max(v)));
        }
        if let Some(x) = &features {
            if x.n_rows() != num_nodes {
                return Err(Error::MalformedDataset(format!(
                    "feature matrix has {} rows for {num_nodes} nodes",
                    x.n_rows()
                )));
            }
        }
        Ok(Self {
            name: name.into(),
            num_nodes,
            edges: set.into_iter().collect(),
            features,
        })
    }

    pub fn num_nodes(&self) -> usize {
        self.num_nodes
    }

    pub fn num_edges(&self) -> usize {
        self.edges.len()
    }

    pub fn edges(&self) -> &[Edge] {
        &self.edges
    }

    pub fn features(&self) -> Option<&DenseMatrix> {
        self.features.as_ref()
    }

    pub fn feature_dim(&self) -> usize {
        self.features.as_ref().map_or(0, DenseMatrix::n_cols)
    }

    /// Same nodes and features, different edge set.
    pub fn with_edges(&self, edges: impl IntoIterator<Item = Edge>) -> Result<Self> {
        Self::new(
            self.name.clone(),
            self.num_nodes,
            edges,
            self.features.clone(),
        )
    }

    pub fn has_edge(&self, u: usize, v: usize) -> bool {
        self.edges.binary_search(&(u.min(v), u.max(v))).is_ok()
    }
}

/// Symmetric 0/1 adjacency matrix of the dataset's edges.
pub fn adjacency_from_edges(dataset: &GraphDataset) -> Result<SparseMatrix> {
    adjacency_from_edge_list(dataset.num_nodes(), dataset.edges())
}

pub fn adjacency_from_edge_list(num_nodes: usize, edges: &[Edge]) -> Result<SparseMatrix> {
    let mut triplets = Vec::with_capacity(edges.len() * 2);
    for &(u, v) in edges {
        if u >= num_nodes || v >= num_nodes {
            return Err(Error::MalformedDataset(format!(
                "edge ({u}, {v}) references a node outside 0..{num_nodes}"
            )));
        }
        if u == v {
            return Err(Error::MalformedDataset(format!("self-loop on node {u}")));
        }
        triplets.push((u, v, 1.0));
        triplets.push((v, u, 1.0));
    }
    // duplicates would sum to 2.0; collapse them back to unit weight
    triplets.sort_by_key(|&(r, c, _)| (r, c));
    triplets.dedup_by_key(|t| (t.0, t.1));
    SparseMatrix::from_triplets(num_nodes, num_nodes, &triplets)
}

/// Row sums of a square matrix.
pub fn degrees(a: &SparseMatrix) -> Result<Vec<f64>> {
    if !a.is_square() {
        return Err(Error::shape(
            "degrees",
            format!("{}x{} is not square", a.n_rows(), a.n_cols()),
        ));
    }
    Ok(a.row_sums())
}

/// Renormalized operator `S[i][j] = Ã[i][j] / √((d_i+1)(d_j+1))` with `Ã = A + I`.
///
/// `A` must be square, symmetric, non-negative and have an empty diagonal.
/// The result is exactly symmetric: each entry is computed from the
/// unordered pair `{d_i, d_j}` with a commutative product.
pub fn normalized_operator(a: &SparseMatrix) -> Result<SparseMatrix> {
    let deg = degrees(a)?;
    if !a.is_symmetric() {
        return Err(Error::ContractViolation(
            "normalized_operator requires a symmetric adjacency matrix".into(),
        ));
    }
    let n = a.n_rows();
    let mut row_offsets = Vec::with_capacity(n + 1);
    let mut col_indices = Vec::with_capacity(a.nnz() + n);
    let mut values = Vec::with_capacity(a.nnz() + n);
    row_offsets.push(0);
    for i in 0..n {
        let mut self_loop_done = false;
        for (j, w) in a.row(i) {
            if j == i {
                return Err(Error::ContractViolation(format!(
                    "adjacency has a diagonal entry at node {i}"
                )));
            }
            if w < 0.0 {
                return Err(Error::ContractViolation(format!(
                    "negative edge weight at ({i}, {j})"
                )));
            }
            if j > i && !self_loop_done {
                col_indices.push(i);
                values.push(1.0 / (deg[i] + 1.0));
                self_loop_done = true;
            }
            col_indices.push(j);
            values.push(w / ((deg[i] + 1.0) * (deg[j] + 1.0)).sqrt());
        }
        if !self_loop_done {
            col_indices.push(i);
            values.push(1.0 / (deg[i] + 1.0));
        }
        row_offsets.push(col_indices.len());
    }
    SparseMatrix::from_csr(n, n, row_offsets, col_indices, values)
}

/// `spmm(S, X)`: exact sparse-dense product.
pub fn spmm(s: &SparseMatrix, x: &DenseMatrix) -> Result<DenseMatrix> {
    s.spmm(x)
}
