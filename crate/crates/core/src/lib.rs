//! Linear graph auto-encoders.
//!
//! Feature propagation is pulled out of the encoder and done once up front as
//! `X̄ = S^k X`, with `S = D̃^{-1/2}(A + I)D̃^{-1/2}`. A fixed two-layer
//! encoder (L-GAE) or its variational form (L-VGAE) is then trained on `X̄`
//! with an inner-product decoder. GCN-based GAE/VGAE encoders, which
//! propagate once per layer, are included for comparison, along with the
//! link-prediction harness used to evaluate all four.

pub mod data;
pub mod dense;
pub mod error;
pub mod experiment;
pub mod graph;
pub mod linkpred;
pub mod models;
pub mod propagation;
pub mod seed;
pub mod sparse;
pub mod training;

pub use dense::DenseMatrix;
pub use error::{Error, Result};
pub use graph::{adjacency_from_edges, degrees, normalized_operator, spmm, Edge, GraphDataset};
pub use models::{ModelConfig, ModelParams, Variant};
pub use propagation::{identity_features, propagate, FeatureInput};
pub use sparse::SparseMatrix;
