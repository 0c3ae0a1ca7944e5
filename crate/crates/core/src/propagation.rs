//! k-hop feature smoothing `X̄ = S^k X`, computed once ahead of training.
//!
//! `S^k` is never formed; each hop is one sparse × dense product, so the cost
//! stays at `O(k · nnz(S) · d)`. The featureless stream (`X = I`) is handled
//! either implicitly through [`FeatureInput::Implicit`] or, when a dense
//! `S^k I` is wanted on disk, by streaming column blocks of the identity.

use std::fs::{self, File};
use std::io::{BufReader, BufWriter, Read, Seek, SeekFrom, Write};
use std::path::{Path, PathBuf};

use crate::dense::DenseMatrix;
use crate::error::{Error, Result};
use crate::sparse::SparseMatrix;

pub const DEFAULT_MAX_HOPS: usize = 64;
pub const DEFAULT_IDENTITY_BLOCK: usize = 1024;

const CACHE_MAGIC: &[u8; 8] = b"LGAEXBAR";
const CACHE_VERSION: u32 = 1;
const CACHE_HEADER_LEN: u64 = 8 + 4 + 8 + 8;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct PropagationConfig {
    pub k: usize,
    pub featureless: bool,
    pub max_k: usize,
}

impl PropagationConfig {
    pub fn new(k: usize, featureless: bool) -> Result<Self> {
        let cfg = Self {
            k,
            featureless,
            max_k: DEFAULT_MAX_HOPS,
        };
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        if self.k > self.max_k {
            return Err(Error::Config(format!(
                "hop count {} exceeds the cap of {}",
                self.k, self.max_k
            )));
        }
        Ok(())
    }
}

/// Applies `s` to `x` `k` times. `k = 0` returns a copy of `x`.
pub fn propagate(s: &SparseMatrix, x: &DenseMatrix, k: usize) -> Result<DenseMatrix> {
    if !s.is_square() {
        return Err(Error::shape(
            "propagate",
            format!("operator is {}x{}", s.n_rows(), s.n_cols()),
        ));
    }
    if s.n_cols() != x.n_rows() {
        return Err(Error::shape(
            "propagate",
            format!("operator is {}x{} but X has {} rows", s.n_rows(), s.n_cols(), x.n_rows()),
        ));
    }
    let mut out = x.clone();
    for _ in 0..k {
        out = s.spmm(&out)?;
    }
    Ok(out)
}

/// `n × n` identity used as the feature matrix of the featureless stream.
pub fn identity_features(n: usize) -> DenseMatrix {
    DenseMatrix::identity(n)
}

/// Feeds `S^k I` to `sink` one column block at a time, as `(first_column, block)`.
/// Peak memory is `n × block_cols` rather than `n × n`.
pub fn propagate_identity_blocks(
    s: &SparseMatrix,
    k: usize,
    block_cols: usize,
    mut sink: impl FnMut(usize, &DenseMatrix) -> Result<()>,
) -> Result<()> {
    if !s.is_square() {
        return Err(Error::shape("propagate_identity_blocks", "operator not square"));
    }
    let n = s.n_rows();
    let block_cols = block_cols.max(1);
    let mut start = 0;
    while start < n {
        let end = (start + block_cols).min(n);
        let eye_block =
            DenseMatrix::from_fn(n, end - start, |i, j| if i == start + j { 1.0 } else { 0.0 });
        let block = propagate(s, &eye_block, k)?;
        sink(start, &block)?;
        start = end;
    }
    Ok(())
}

/// Node features as seen by the first encoder layer.
///
/// Only two products are ever needed from the input: `X · W` on the forward
/// pass and `Xᵀ · G` for the first layer's weight gradient. The implicit form
/// evaluates both with sparse products, so featureless inputs never become an
/// `n × n` dense matrix.
#[derive(Clone, Debug)]
pub enum FeatureInput {
    Dense(DenseMatrix),
    /// `S^hops · I` for a symmetric operator `S`. `hops = 0` is the raw identity.
    Implicit { operator: SparseMatrix, hops: usize },
}

impl FeatureInput {
    pub fn implicit_identity(operator: SparseMatrix, hops: usize) -> Result<Self> {
        if !operator.is_symmetric() {
            return Err(Error::ContractViolation(
                "implicit identity features need a symmetric operator".into(),
            ));
        }
        Ok(FeatureInput::Implicit { operator, hops })
    }

    pub fn n_rows(&self) -> usize {
        match self {
            FeatureInput::Dense(x) => x.n_rows(),
            FeatureInput::Implicit { operator, .. } => operator.n_rows(),
        }
    }

    pub fn n_cols(&self) -> usize {
        match self {
            FeatureInput::Dense(x) => x.n_cols(),
            FeatureInput::Implicit { operator, .. } => operator.n_cols(),
        }
    }

    /// `X · w`
    pub fn right_mul(&self, w: &DenseMatrix) -> Result<DenseMatrix> {
        match self {
            FeatureInput::Dense(x) => x.matmul(w),
            FeatureInput::Implicit { operator, hops } => propagate(operator, w, *hops),
        }
    }

    /// `Xᵀ · g`
    pub fn t_mul(&self, g: &DenseMatrix) -> Result<DenseMatrix> {
        match self {
            FeatureInput::Dense(x) => x.t_matmul(g),
            // (S^k)ᵀ = S^k for symmetric S
            FeatureInput::Implicit { operator, hops } => propagate(operator, g, *hops),
        }
    }

    pub fn to_dense(&self) -> Result<DenseMatrix> {
        match self {
            FeatureInput::Dense(x) => Ok(x.clone()),
            FeatureInput::Implicit { operator, hops } => {
                propagate(operator, &identity_features(operator.n_rows()), *hops)
            }
        }
    }
}

/// Identifies one cached `X̄`.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct CacheKey {
    /// Hex digest of the graph and features the operator was built from.
    pub content_hash: String,
    pub k: usize,
    pub featureless: bool,
}

impl CacheKey {
    pub fn file_name(&self) -> String {
        let short = &self.content_hash[..self.content_hash.len().min(16)];
        let stream = if self.featureless { "identity" } else { "features" };
        format!("xbar-{short}-k{}-{stream}.bin", self.k)
    }
}

fn write_header(w: &mut impl Write, n_rows: usize, n_cols: usize) -> std::io::Result<()> {
    w.write_all(CACHE_MAGIC)?;
    w.write_all(&CACHE_VERSION.to_le_bytes())?;
    w.write_all(&(n_rows as u64).to_le_bytes())?;
    w.write_all(&(n_cols as u64).to_le_bytes())
}

fn temp_in_dir(path: &Path) -> Result<tempfile::NamedTempFile> {
    let dir = match path.parent() {
        Some(p) if !p.as_os_str().is_empty() => p.to_path_buf(),
        _ => PathBuf::from("."),
    };
    fs::create_dir_all(&dir)?;
    Ok(tempfile::NamedTempFile::new_in(dir)?)
}

fn persist(tmp: tempfile::NamedTempFile, path: &Path) -> Result<()> {
    tmp.persist(path).map_err(|e| Error::Io(e.error))?;
    Ok(())
}

/// Writes `x` in the cache layout. The file appears atomically via rename.
pub fn write_cache(path: &Path, x: &DenseMatrix) -> Result<()> {
    let mut tmp = temp_in_dir(path)?;
    {
        let mut w = BufWriter::new(tmp.as_file_mut());
        write_header(&mut w, x.n_rows(), x.n_cols())?;
        for v in x.as_slice() {
            w.write_all(&v.to_le_bytes())?;
        }
        w.flush()?;
    }
    persist(tmp, path)
}

/// Streams `S^k I` into a cache file column block by column block.
pub fn write_identity_cache(
    path: &Path,
    s: &SparseMatrix,
    k: usize,
    block_cols: usize,
) -> Result<(usize, usize)> {
    let n = s.n_rows();
    let mut tmp = temp_in_dir(path)?;
    {
        let file = tmp.as_file_mut();
        let mut header = Vec::with_capacity(CACHE_HEADER_LEN as usize);
        write_header(&mut header, n, n)?;
        file.write_all(&header)?;
        file.set_len(CACHE_HEADER_LEN + (n * n * 8) as u64)?;
        propagate_identity_blocks(s, k, block_cols, |start, block| {
            let mut buf = Vec::with_capacity(block.n_cols() * 8);
            for i in 0..n {
                buf.clear();
                for v in block.row(i) {
                    buf.extend_from_slice(&v.to_le_bytes());
                }
                let offset = CACHE_HEADER_LEN + ((i * n + start) * 8) as u64;
                file.seek(SeekFrom::Start(offset))?;
                file.write_all(&buf)?;
            }
            Ok(())
        })?;
        file.flush()?;
    }
    persist(tmp, path)?;
    Ok((n, n))
}

pub fn read_cache(path: &Path) -> Result<DenseMatrix> {
    let bad = |msg: &str| Error::Format {
        path: path.to_path_buf(),
        msg: msg.to_string(),
    };
    let mut r = BufReader::new(File::open(path)?);
    let mut magic = [0u8; 8];
    r.read_exact(&mut magic)?;
    if &magic != CACHE_MAGIC {
        return Err(bad("wrong magic bytes"));
    }
    let mut b4 = [0u8; 4];
    r.read_exact(&mut b4)?;
    if u32::from_le_bytes(b4) != CACHE_VERSION {
        return Err(bad("unsupported version"));
    }
    let mut b8 = [0u8; 8];
    r.read_exact(&mut b8)?;
    let n_rows = u64::from_le_bytes(b8) as usize;
    r.read_exact(&mut b8)?;
    let n_cols = u64::from_le_bytes(b8) as usize;
    let mut data = Vec::with_capacity(n_rows * n_cols);
    for _ in 0..n_rows * n_cols {
        r.read_exact(&mut b8)
            .map_err(|_| bad("truncated payload"))?;
        data.push(f64::from_le_bytes(b8));
    }
    if r.read(&mut b8)? != 0 {
        return Err(bad("trailing bytes"));
    }
    DenseMatrix::from_vec(n_rows, n_cols, data)
}

/// Returns the cached `X̄` for `key` under `dir`, computing and storing it on a miss.
pub fn cached_propagate(
    dir: &Path,
    key: &CacheKey,
    compute: impl FnOnce() -> Result<DenseMatrix>,
) -> Result<DenseMatrix> {
    let path = dir.join(key.file_name());
    if path.exists() {
        if let Ok(x) = read_cache(&path) {
            return Ok(x);
        }
    }
    let x = compute()?;
    write_cache(&path, &x)?;
    Ok(x)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::graph::{adjacency_from_edges, normalized_operator, GraphDataset};

    fn path_operator(n: usize) -> SparseMatrix {
        let g = GraphDataset::new("p", n, (0..n - 1).map(|i| (i, i + 1)), None).unwrap();
        normalized_operator(&adjacency_from_edges(&g).unwrap()).unwrap()
    }

    #[test]
    fn zero_hops_is_a_copy() {
        let s = path_operator(4);
        let x = DenseMatrix::from_fn(4, 2, |i, j| (i + 3 * j) as f64);
        assert_eq!(propagate(&s, &x, 0).unwrap(), x);
    }

    #[test]
    fn three_hops_unrolled() {
        let s = path_operator(5);
        let x = DenseMatrix::from_fn(5, 3, |i, j| ((i * j) % 4) as f64 - 1.0);
        let unrolled = s.spmm(&s.spmm(&s.spmm(&x).unwrap()).unwrap()).unwrap();
        assert_eq!(propagate(&s, &x, 3).unwrap(), unrolled);
    }

    #[test]
    fn identity_examples() {
        assert_eq!(identity_features(1).to_rows(), vec![vec![1.0]]);
        assert_eq!(identity_features(3), DenseMatrix::identity(3));
        let s = path_operator(4);
        assert_eq!(propagate(&s, &identity_features(4), 1).unwrap(), s.to_dense());
    }

    #[test]
    fn shape_errors() {
        let s = path_operator(3);
        assert!(propagate(&s, &DenseMatrix::zeros(4, 1), 1).is_err());
        let rect = SparseMatrix::from_triplets(2, 3, &[]).unwrap();
        assert!(propagate(&rect, &DenseMatrix::zeros(3, 1), 1).is_err());
    }

    #[test]
    fn hop_cap() {
        assert!(PropagationConfig::new(64, false).is_ok());
        assert!(PropagationConfig::new(65, true).is_err());
    }

    #[test]
    fn implicit_identity_matches_dense() {
        let s = path_operator(6);
        let input = FeatureInput::implicit_identity(s.clone(), 2).unwrap();
        let dense = FeatureInput::Dense(propagate(&s, &identity_features(6), 2).unwrap());
        let w = DenseMatrix::from_fn(6, 3, |i, j| (i as f64 - j as f64) * 0.3);
        assert!(input.right_mul(&w).unwrap().max_abs_diff(&dense.right_mul(&w).unwrap()) < 1e-14);
        assert!(input.t_mul(&w).unwrap().max_abs_diff(&dense.t_mul(&w).unwrap()) < 1e-14);
    }

    #[test]
    fn cache_round_trip_and_blocked_identity() {
        let dir = tempfile::tempdir().unwrap();
        let s = path_operator(7);
        let dense = propagate(&s, &identity_features(7), 3).unwrap();

        let p = dir.path().join("a.bin");
        write_cache(&p, &dense).unwrap();
        assert_eq!(read_cache(&p).unwrap(), dense);

        let bytes = fs::read(&p).unwrap();
        assert_eq!(&bytes[..8], b"LGAEXBAR");
        assert_eq!(u32::from_le_bytes(bytes[8..12].try_into().unwrap()), 1);
        assert_eq!(bytes.len(), 28 + 7 * 7 * 8);

        // block width that does not divide n
        let q = dir.path().join("b.bin");
        write_identity_cache(&q, &s, 3, 3).unwrap();
        assert_eq!(read_cache(&q).unwrap(), dense);
        assert_eq!(fs::read(&q).unwrap(), bytes);
    }

    #[test]
    fn cached_propagate_hits_on_second_call() {
        let dir = tempfile::tempdir().unwrap();
        let key = CacheKey {
            content_hash: "ab".repeat(32),
            k: 2,
            featureless: false,
        };
        let x = DenseMatrix::from_fn(3, 2, |i, j| (i + j) as f64);
        let first = cached_propagate(dir.path(), &key, || Ok(x.clone())).unwrap();
        let second = cached_propagate(dir.path(), &key, || panic!("should hit the cache")).unwrap();
        assert_eq!(first, second);
    }

    #[test]
    fn rejects_corrupt_cache() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("bad.bin");
        fs::write(&p, b"NOTMAGIC0000").unwrap();
        assert!(matches!(read_cache(&p), Err(Error::Format { .. })));
    }
}
