//! Dataset ingestion, integrity checking and synthetic graphs.
//!
//! A dataset directory holds three plain-text files:
//!
//! * `edges.txt`: one `u v` pair of 0-based node indices per line.
//! * `features.txt` (optional): one whitespace-separated row per node.
//! * `manifest.txt`: `key=value` lines with `name`, `num_nodes`, `num_edges`,
//!   `feature_dim`, `sha256_edges` and `sha256_features`.

mod files;
mod synthetic;

pub use files::{
    build_manifest, graph_digest, load_dataset, save_dataset, DatasetManifest, EDGES_FILE,
    FEATURES_FILE, MANIFEST_FILE,
};
pub use synthetic::{generate_synthetic, planted_partition, SyntheticKind};
