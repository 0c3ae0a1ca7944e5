//! Trainable tensors and the binary checkpoint format.
//!
//! Checkpoint layout (all integers little-endian):
//!
//! ```text
//! "LGAEPARM" | version u32
//! variant u8 | input_dim u64 | k u64 | seed u64 | n_hidden u64 | hidden u64 × n_hidden
//! n_tensors u32
//! per tensor: name_len u32 | name bytes | rows u64 | cols u64 | f64 × rows·cols
//! ```

use std::fs;
use std::path::Path;

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::dense::DenseMatrix;
use crate::error::{Error, Result};
use crate::models::config::{ModelConfig, Variant};

const PARAM_MAGIC: &[u8; 8] = b"LGAEPARM";
const PARAM_VERSION: u32 = 1;

#[derive(Clone, Debug, PartialEq)]
pub struct Layer {
    pub weight: DenseMatrix,
    pub bias: Option<Vec<f64>>,
}

impl Layer {
    fn zeros_like(&self) -> Layer {
        Layer {
            weight: DenseMatrix::zeros(self.weight.n_rows(), self.weight.n_cols()),
            bias: self.bias.as_ref().map(|b| vec![0.0; b.len()]),
        }
    }
}

/// Encoder weights. `layers.last()` produces `z` (or `mu` for the variational
/// variants); `log_sigma` is the second head that shares every earlier layer.
#[derive(Clone, Debug, PartialEq)]
pub struct ModelParams {
    pub layers: Vec<Layer>,
    pub log_sigma: Option<Layer>,
}

/// Borrowed view of one named tensor.
pub struct TensorRef<'a> {
    pub name: String,
    pub rows: usize,
    pub cols: usize,
    pub data: &'a [f64],
}

fn glorot_layer(
    rng: &mut ChaCha8Rng,
    fan_in: usize,
    fan_out: usize,
    bias: bool,
) -> Layer {
    let limit = (6.0 / (fan_in + fan_out) as f64).sqrt();
    let weight = DenseMatrix::from_fn(fan_in, fan_out, |_, _| rng.random_range(-limit..limit));
    Layer {
        weight,
        bias: bias.then(|| vec![0.0; fan_out]),
    }
}

impl ModelParams {
    /// Glorot-uniform weights, zero biases, drawn from a ChaCha8 stream seeded
    /// with `config.seed`.
    pub fn init(config: &ModelConfig) -> Result<Self> {
        config.validate()?;
        let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
        let bias = config.has_bias();
        let shapes = config.layer_shapes();
        let layers: Vec<Layer> = shapes
            .iter()
            .map(|&(i, o)| glorot_layer(&mut rng, i, o, bias))
            .collect();
        let log_sigma = config.variant.is_variational().then(|| {
            let &(i, o) = shapes.last().unwrap();
            glorot_layer(&mut rng, i, o, bias)
        });
        Ok(Self { layers, log_sigma })
    }

    pub fn zeros_like(&self) -> Self {
        Self {
            layers: self.layers.iter().map(Layer::zeros_like).collect(),
            log_sigma: self.log_sigma.as_ref().map(Layer::zeros_like),
        }
    }

    pub fn is_variational(&self) -> bool {
        self.log_sigma.is_some()
    }

    pub fn latent_dim(&self) -> usize {
        self.layers.last().map_or(0, |l| l.weight.n_cols())
    }

    pub fn input_dim(&self) -> usize {
        self.layers.first().map_or(0, |l| l.weight.n_rows())
    }

    /// Checks the tensors against the shapes `config` implies.
    pub fn check_against(&self, config: &ModelConfig) -> Result<()> {
        let shapes = config.layer_shapes();
        let mismatch = |what: String| Err(Error::shape("ModelParams", what));
        if self.layers.len() != shapes.len() {
            return mismatch(format!(
                "{} layers, config expects {}",
                self.layers.len(),
                shapes.len()
            ));
        }
        let layers = self.layers.iter().chain(self.log_sigma.as_ref());
        let expected = shapes.iter().chain(config.variant.is_variational().then(|| shapes.last().unwrap()));
        for (idx, (layer, &(i, o))) in layers.zip(expected).enumerate() {
            if layer.weight.shape() != (i, o) {
                return mismatch(format!(
                    "tensor {idx} is {:?}, expected {:?}",
                    layer.weight.shape(),
                    (i, o)
                ));
            }
            if layer.bias.is_some() != config.has_bias()
                || layer.bias.as_ref().is_some_and(|b| b.len() != o)
            {
                return mismatch(format!("bias of tensor {idx} does not match config"));
            }
        }
        if self.is_variational() != config.variant.is_variational() {
            return mismatch("variational head presence does not match variant".into());
        }
        Ok(())
    }

    fn named_layers(&self) -> Vec<(String, &Layer)> {
        let mut out: Vec<(String, &Layer)> = self
            .layers
            .iter()
            .enumerate()
            .map(|(i, l)| (format!("layer{i}"), l))
            .collect();
        if let Some(l) = &self.log_sigma {
            out.push(("log_sigma".to_string(), l));
        }
        out
    }

    /// All tensors in a fixed order: per layer weight then bias, then the
    /// log-sigma head.
    pub fn tensors(&self) -> Vec<TensorRef<'_>> {
        let mut out = Vec::new();
        for (prefix, layer) in self.named_layers() {
            out.push(TensorRef {
                name: format!("{prefix}.weight"),
                rows: layer.weight.n_rows(),
                cols: layer.weight.n_cols(),
                data: layer.weight.as_slice(),
            });
            if let Some(b) = &layer.bias {
                out.push(TensorRef {
                    name: format!("{prefix}.bias"),
                    rows: 1,
                    cols: b.len(),
                    data: b,
                });
            }
        }
        out
    }

    /// Mutable slices in the same order as [`ModelParams::tensors`].
    pub fn tensors_mut(&mut self) -> Vec<&mut [f64]> {
        let mut out: Vec<&mut [f64]> = Vec::new();
        for layer in self.layers.iter_mut().chain(self.log_sigma.as_mut()) {
            out.push(layer.weight.as_mut_slice());
            if let Some(b) = layer.bias.as_mut() {
                out.push(b.as_mut_slice());
            }
        }
        out
    }

    pub fn num_scalars(&self) -> usize {
        self.tensors().iter().map(|t| t.data.len()).sum()
    }
}

fn push_u32(buf: &mut Vec<u8>, v: u32) {
    buf.extend_from_slice(&v.to_le_bytes());
}

fn push_u64(buf: &mut Vec<u8>, v: u64) {
    buf.extend_from_slice(&v.to_le_bytes());
}

pub fn checkpoint_bytes(config: &ModelConfig, params: &ModelParams) -> Vec<u8> {
    let mut buf = Vec::new();
    buf.extend_from_slice(PARAM_MAGIC);
    push_u32(&mut buf, PARAM_VERSION);
    buf.push(config.variant.code());
    push_u64(&mut buf, config.input_dim as u64);
    push_u64(&mut buf, config.k as u64);
    push_u64(&mut buf, config.seed);
    push_u64(&mut buf, config.hidden_dims.len() as u64);
    for &h in &config.hidden_dims {
        push_u64(&mut buf, h as u64);
    }
    let tensors = params.tensors();
    push_u32(&mut buf, tensors.len() as u32);
    for t in tensors {
        push_u32(&mut buf, t.name.len() as u32);
        buf.extend_from_slice(t.name.as_bytes());
        push_u64(&mut buf, t.rows as u64);
        push_u64(&mut buf, t.cols as u64);
        for v in t.data {
            buf.extend_from_slice(&v.to_le_bytes());
        }
    }
    buf
}

pub fn write_checkpoint(path: &Path, config: &ModelConfig, params: &ModelParams) -> Result<()> {
    fs::write(path, checkpoint_bytes(config, params))?;
    Ok(())
}

struct Cursor<'a> {
    bytes: &'a [u8],
    pos: usize,
    path: &'a Path,
}

impl<'a> Cursor<'a> {
    fn take(&mut self, n: usize) -> Result<&'a [u8]> {
        if self.pos + n > self.bytes.len() {
            return Err(Error::Format {
                path: self.path.to_path_buf(),
                msg: "truncated checkpoint".into(),
            });
        }
        let s = &self.bytes[self.pos..self.pos + n];
        self.pos += n;
        Ok(s)
    }

    fn u32(&mut self) -> Result<u32> {
        Ok(u32::from_le_bytes(self.take(4)?.try_into().unwrap()))
    }

    fn u64(&mut self) -> Result<u64> {
        Ok(u64::from_le_bytes(self.take(8)?.try_into().unwrap()))
    }

    fn f64s(&mut self, n: usize) -> Result<Vec<f64>> {
        Ok(self
            .take(n * 8)?
            .chunks_exact(8)
            .map(|c| f64::from_le_bytes(c.try_into().unwrap()))
            .collect())
    }
}

pub fn parse_checkpoint(bytes: &[u8], path: &Path) -> Result<(ModelConfig, ModelParams)> {
    let bad = |msg: String| Error::Format {
        path: path.to_path_buf(),
        msg,
    };
    let mut c = Cursor { bytes, pos: 0, path };
    if c.take(8)? != PARAM_MAGIC {
        return Err(bad("wrong magic bytes".into()));
    }
    if c.u32()? != PARAM_VERSION {
        return Err(bad("unsupported version".into()));
    }
    let variant = Variant::from_code(c.take(1)?[0]).ok_or_else(|| bad("unknown variant".into()))?;
    let input_dim = c.u64()? as usize;
    let k = c.u64()? as usize;
    let seed = c.u64()?;
    let n_hidden = c.u64()? as usize;
    let hidden_dims = (0..n_hidden)
        .map(|_| c.u64().map(|h| h as usize))
        .collect::<Result<Vec<_>>>()?;
    let config = ModelConfig {
        variant,
        input_dim,
        hidden_dims,
        k,
        seed,
    };
    config.validate()?;

    let mut params = ModelParams::init(&ModelConfig { seed: 0, ..config.clone() })?.zeros_like();
    let expected: Vec<(String, usize, usize)> = params
        .tensors()
        .into_iter()
        .map(|t| (t.name, t.rows, t.cols))
        .collect();
    let n_tensors = c.u32()? as usize;
    if n_tensors != expected.len() {
        return Err(bad(format!(
            "{n_tensors} tensors, config implies {}",
            expected.len()
        )));
    }
    let mut loaded = Vec::with_capacity(n_tensors);
    for (name, rows, cols) in &expected {
        let len = c.u32()? as usize;
        let got = String::from_utf8(c.take(len)?.to_vec()).map_err(|_| bad("bad tensor name".into()))?;
        let (r, k) = (c.u64()? as usize, c.u64()? as usize);
        if &got != name || r != *rows || k != *cols {
            return Err(bad(format!("tensor '{got}' {r}x{k} where '{name}' {rows}x{cols} expected")));
        }
        loaded.push(c.f64s(r * k)?);
    }
    if c.pos != bytes.len() {
        return Err(bad("trailing bytes".into()));
    }
    for (slot, data) in params.tensors_mut().into_iter().zip(loaded) {
        slot.copy_from_slice(&data);
    }
    Ok((config, params))
}

pub fn read_checkpoint(path: &Path) -> Result<(ModelConfig, ModelParams)> {
    parse_checkpoint(&fs::read(path)?, path)
}
