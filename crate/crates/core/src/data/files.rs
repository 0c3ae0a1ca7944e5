use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use sha2::{Digest, Sha256};

use crate::dense::DenseMatrix;
use crate::error::{Error, Result};
use crate::graph::GraphDataset;

pub const EDGES_FILE: &str = "edges.txt";
pub const FEATURES_FILE: &str = "features.txt";
pub const MANIFEST_FILE: &str = "manifest.txt";

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct DatasetManifest {
    pub name: String,
    pub num_nodes: usize,
    pub num_edges: usize,
    pub feature_dim: usize,
    pub sha256_edges: String,
    /// Empty when the dataset has no features file.
    pub sha256_features: String,
}

impl DatasetManifest {
    /// Digest over both file digests; identifies the dataset's content.
    pub fn content_hash(&self) -> String {
        let mut h = Sha256::new();
        h.update(self.sha256_edges.as_bytes());
        h.update(b"\n");
        h.update(self.sha256_features.as_bytes());
        hex::encode(h.finalize())
    }

    pub fn to_text(&self) -> String {
        format!(
            "name={}\nnum_nodes={}\nnum_edges={}\nfeature_dim={}\nsha256_edges={}\nsha256_features={}\n",
            self.name,
            self.num_nodes,
            self.num_edges,
            self.feature_dim,
            self.sha256_edges,
            self.sha256_features
        )
    }

    pub fn parse(text: &str, path: &Path) -> Result<Self> {
        let mut kv = BTreeMap::new();
        for (idx, raw) in text.lines().enumerate() {
            let line = raw.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let (k, v) = line.split_once('=').ok_or_else(|| Error::Parse {
                path: path.to_path_buf(),
                line: idx + 1,
                msg: format!("expected key=value, got '{line}'"),
            })?;
            kv.insert(k.trim().to_string(), v.trim().to_string());
        }
        let get = |key: &str| -> Result<String> {
            kv.get(key).cloned().ok_or_else(|| Error::Format {
                path: path.to_path_buf(),
                msg: format!("missing key '{key}'"),
            })
        };
        let count = |key: &str| -> Result<usize> {
            let v = get(key)?;
            v.parse().map_err(|_| Error::Format {
                path: path.to_path_buf(),
                msg: format!("'{key}' is not a count: '{v}'"),
            })
        };
        let feature_dim = count("feature_dim")?;
        Ok(Self {
            name: get("name")?,
            num_nodes: count("num_nodes")?,
            num_edges: count("num_edges")?,
            feature_dim,
            sha256_edges: get("sha256_edges")?,
            sha256_features: if feature_dim > 0 {
                get("sha256_features")?
            } else {
                kv.get("sha256_features").cloned().unwrap_or_default()
            },
        })
    }
}

fn sha256_hex(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}

fn parse_edges(text: &str, path: &Path, num_nodes: usize) -> Result<Vec<(usize, usize)>> {
    let mut edges = Vec::new();
    for (idx, raw) in text.lines().enumerate() {
        let line_no = idx + 1;
        let line = raw.trim();
        if line.is_empty() {
            continue;
        }
        let parse_err = |msg: String| Error::Parse {
            path: path.to_path_buf(),
            line: line_no,
            msg,
        };
        let toks: Vec<&str> = line.split_whitespace().collect();
        if toks.len() != 2 {
            return Err(parse_err(format!("expected 'u v', got '{line}'")));
        }
        let idx_of = |t: &str| -> Result<usize> {
            t.parse()
                .map_err(|_| parse_err(format!("bad node index '{t}'")))
        };
        let (u, v) = (idx_of(toks[0])?, idx_of(toks[1])?);
        if u >= num_nodes || v >= num_nodes {
            return Err(Error::MalformedDataset(format!(
                "{}:{line_no}: node index out of range 0..{num_nodes} in '{line}'",
                path.display()
            )));
        }
        if u == v {
            return Err(Error::MalformedDataset(format!(
                "{}:{line_no}: self-loop on node {u}",
                path.display()
            )));
        }
        edges.push((u, v));
    }
    Ok(edges)
}

fn parse_features(text: &str, path: &Path, num_nodes: usize, dim: usize) -> Result<DenseMatrix> {
    let mut data = Vec::with_capacity(num_nodes * dim);
    let mut rows = 0;
    for (idx, raw) in text.lines().enumerate() {
        let line = raw.trim();
        if line.is_empty() {
            continue;
        }
        let parse_err = |msg: String| Error::Parse {
            path: path.to_path_buf(),
            line: idx + 1,
            msg,
        };
        let before = data.len();
        for tok in line.split_whitespace() {
            let v: f64 = tok
                .parse()
                .map_err(|_| parse_err(format!("bad number '{tok}'")))?;
            if !v.is_finite() {
                return Err(parse_err(format!("non-finite value '{tok}'")));
            }
            data.push(v);
        }
        if data.len() - before != dim {
            return Err(parse_err(format!(
                "row has {} values, expected {dim}",
                data.len() - before
            )));
        }
        rows += 1;
    }
    if rows != num_nodes {
        return Err(Error::MalformedDataset(format!(
            "{} has {rows} rows for {num_nodes} nodes",
            path.display()
        )));
    }
    DenseMatrix::from_vec(num_nodes, dim, data)
}

/// Loads a dataset directory, verifying file digests and counts against the manifest.
pub fn load_dataset(dir: &Path) -> Result<GraphDataset> {
    let manifest_path = dir.join(MANIFEST_FILE);
    let manifest = DatasetManifest::parse(&fs::read_to_string(&manifest_path)?, &manifest_path)?;

    let edges_path = dir.join(EDGES_FILE);
    let edge_bytes = fs::read(&edges_path)?;
    if sha256_hex(&edge_bytes) != manifest.sha256_edges {
        return Err(Error::Integrity(format!(
            "{} does not match sha256_edges in the manifest",
            edges_path.display()
        )));
    }
    let features = if manifest.feature_dim > 0 {
        let features_path = dir.join(FEATURES_FILE);
        let bytes = fs::read(&features_path)?;
        if sha256_hex(&bytes) != manifest.sha256_features {
            return Err(Error::Integrity(format!(
                "{} does not match sha256_features in the manifest",
                features_path.display()
            )));
        }
        let text = String::from_utf8(bytes).map_err(|_| Error::Format {
            path: features_path.clone(),
            msg: "not UTF-8".into(),
        })?;
        Some(parse_features(
            &text,
            &features_path,
            manifest.num_nodes,
            manifest.feature_dim,
        )?)
    } else {
        None
    };
    let text = String::from_utf8(edge_bytes).map_err(|_| Error::Format {
        path: edges_path.clone(),
        msg: "not UTF-8".into(),
    })?;
    let edges = parse_edges(&text, &edges_path, manifest.num_nodes)?;
    let dataset = GraphDataset::new(manifest.name.clone(), manifest.num_nodes, edges, features)?;
    if dataset.num_edges() != manifest.num_edges {
        return Err(Error::Integrity(format!(
            "manifest lists {} edges, {} distinct edges found",
            manifest.num_edges,
            dataset.num_edges()
        )));
    }
    Ok(dataset)
}

fn edges_text(dataset: &GraphDataset) -> String {
    let mut s = String::with_capacity(dataset.num_edges() * 12);
    for (u, v) in dataset.edges() {
        let _ = writeln!(s, "{u} {v}");
    }
    s
}

fn features_text(x: &DenseMatrix) -> String {
    let mut s = String::new();
    for i in 0..x.n_rows() {
        for (j, v) in x.row(i).iter().enumerate() {
            if j > 0 {
                s.push(' ');
            }
            let _ = write!(s, "{v}");
        }
        s.push('\n');
    }
    s
}

/// Writes the canonical form of `dataset` (sorted `u < v` edges) with a fresh manifest.
pub fn save_dataset(dataset: &GraphDataset, dir: &Path) -> Result<DatasetManifest> {
    fs::create_dir_all(dir)?;
    let edges = edges_text(dataset);
    fs::write(dir.join(EDGES_FILE), &edges)?;
    let sha256_features = match dataset.features() {
        Some(x) => {
            let text = features_text(x);
            fs::write(dir.join(FEATURES_FILE), &text)?;
            sha256_hex(text.as_bytes())
        }
        None => String::new(),
    };
    let manifest = DatasetManifest {
        name: dataset.name.clone(),
        num_nodes: dataset.num_nodes(),
        num_edges: dataset.num_edges(),
        feature_dim: dataset.feature_dim(),
        sha256_edges: sha256_hex(edges.as_bytes()),
        sha256_features,
    };
    fs::write(dir.join(MANIFEST_FILE), manifest.to_text())?;
    Ok(manifest)
}

/// Writes a manifest for hand-converted `edges.txt`/`features.txt` files.
/// Edge and feature counts are taken from the parsed files.
pub fn build_manifest(dir: &Path, name: &str, num_nodes: usize) -> Result<DatasetManifest> {
    let edges_path = dir.join(EDGES_FILE);
    let edge_bytes = fs::read(&edges_path)?;
    let text = String::from_utf8_lossy(&edge_bytes);
    let dataset = GraphDataset::new(name, num_nodes, parse_edges(&text, &edges_path, num_nodes)?, None)?;

    let features_path: PathBuf = dir.join(FEATURES_FILE);
    let (feature_dim, sha256_features) = if features_path.exists() {
        let bytes = fs::read(&features_path)?;
        let text = String::from_utf8_lossy(&bytes);
        let dim = text
            .lines()
            .find(|l| !l.trim().is_empty())
            .map_or(0, |l| l.split_whitespace().count());
        parse_features(&text, &features_path, num_nodes, dim)?;
        (dim, sha256_hex(&bytes))
    } else {
        (0, String::new())
    };
    let manifest = DatasetManifest {
        name: name.to_string(),
        num_nodes,
        num_edges: dataset.num_edges(),
        feature_dim,
        sha256_edges: sha256_hex(&edge_bytes),
        sha256_features,
    };
    fs::write(dir.join(MANIFEST_FILE), manifest.to_text())?;
    Ok(manifest)
}

/// Digest of a graph's canonical edges and feature values. Keys on-disk
/// propagation caches, so it must change whenever `S` or `X` would.
pub fn graph_digest(dataset: &GraphDataset) -> String {
    let mut h = Sha256::new();
    h.update((dataset.num_nodes() as u64).to_le_bytes());
    for &(u, v) in dataset.edges() {
        h.update((u as u64).to_le_bytes());
        h.update((v as u64).to_le_bytes());
    }
    if let Some(x) = dataset.features() {
        h.update((x.n_cols() as u64).to_le_bytes());
        for v in x.as_slice() {
            h.update(v.to_le_bytes());
        }
    }
    hex::encode(h.finalize())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn write_dir(edges: &str, features: Option<&str>) -> tempfile::TempDir {
        let dir = tempfile::tempdir().unwrap();
        fs::write(dir.path().join(EDGES_FILE), edges).unwrap();
        if let Some(f) = features {
            fs::write(dir.path().join(FEATURES_FILE), f).unwrap();
        }
        dir
    }

    #[test]
    fn both_directions_collapse_to_one_edge() {
        let dir = write_dir("0 1\n1 0", None);
        let m = build_manifest(dir.path(), "tiny", 2).unwrap();
        assert_eq!(m.num_edges, 1);
        let g = load_dataset(dir.path()).unwrap();
        assert_eq!(g.edges(), &[(0, 1)]);
        assert!(g.features().is_none());
    }

    #[test]
    fn self_loop_is_rejected() {
        let dir = write_dir("0 1\n3 3\n", None);
        let err = build_manifest(dir.path(), "loop", 4).unwrap_err();
        assert!(matches!(err, Error::MalformedDataset(ref m) if m.contains("self-loop")), "{err}");
    }

    #[test]
    fn malformed_line_reports_line_number() {
        let dir = write_dir("0 1\n1 2\n2 x\n", None);
        let err = build_manifest(dir.path(), "bad", 3).unwrap_err();
        assert!(matches!(err, Error::Parse { line: 3, .. }), "{err}");
    }

    #[test]
    fn out_of_range_index() {
        let dir = write_dir("0 5\n", None);
        assert!(matches!(
            build_manifest(dir.path(), "bad", 3),
            Err(Error::MalformedDataset(_))
        ));
    }

    #[test]
    fn tampering_fails_integrity() {
        let dir = write_dir("0 1\n1 2\n", Some("1 0\n0 1\n0.5 0.5\n"));
        build_manifest(dir.path(), "t", 3).unwrap();
        let g = load_dataset(dir.path()).unwrap();
        assert_eq!(g.feature_dim(), 2);
        fs::write(dir.path().join(EDGES_FILE), "0 1\n0 2\n").unwrap();
        assert!(matches!(load_dataset(dir.path()), Err(Error::Integrity(_))));
    }

    #[test]
    fn feature_row_length_checked() {
        let dir = write_dir("0 1\n", Some("1 0\n0\n"));
        assert!(matches!(
            build_manifest(dir.path(), "t", 2),
            Err(Error::Parse { line: 2, .. })
        ));
    }

    #[test]
    fn digest_tracks_edges_and_features() {
        let g = GraphDataset::new("a", 3, [(0, 1)], None).unwrap();
        let h = graph_digest(&g);
        assert_eq!(h, graph_digest(&g.with_edges([(1, 0)]).unwrap()));
        assert_ne!(h, graph_digest(&g.with_edges([(1, 2)]).unwrap()));
        let with_x = GraphDataset::new("a", 3, [(0, 1)], Some(DenseMatrix::zeros(3, 1))).unwrap();
        assert_ne!(h, graph_digest(&with_x));
    }
}
