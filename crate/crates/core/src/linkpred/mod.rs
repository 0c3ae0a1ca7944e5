//! Link-prediction protocol: held-out edges, sampled non-edges, AUC and AP.

mod metrics;
mod split;

pub use metrics::{auc, average_precision, evaluate, score_edges, MetricResult};
pub use split::{split_edges, EdgeSplit, DEFAULT_TEST_FRAC, DEFAULT_VAL_FRAC};
