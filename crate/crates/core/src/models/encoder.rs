//! Encoder forward passes.
//!
//! Both encoder families share one layer stack. A layer computes
//! `act(P · (H W) + b)` where `P` is `S` for GCN layers and absent for the
//! linear encoders, `b` is present only when the params carry biases, and
//! `act` is ReLU for every layer but the last.

use crate::dense::DenseMatrix;
use crate::error::{Error, Result};
use crate::models::params::{Layer, ModelParams};
use crate::models::Variant;
use crate::propagation::FeatureInput;
use crate::sparse::SparseMatrix;

#[derive(Clone, Debug, PartialEq)]
pub struct LatentOutput {
    pub z: DenseMatrix,
    pub mu: Option<DenseMatrix>,
    pub log_sigma: Option<DenseMatrix>,
    /// The `ε` used to draw `z`, when one was drawn.
    pub noise: Option<DenseMatrix>,
}

impl LatentOutput {
    /// Latent used for scoring edges: `mu` for the variational variants.
    pub fn embedding(&self) -> &DenseMatrix {
        self.mu.as_ref().unwrap_or(&self.z)
    }
}

/// Activations kept from a forward pass for the backward pass.
#[derive(Clone, Debug)]
pub struct ForwardCache {
    /// Post-ReLU output of every layer except the last.
    pub hidden: Vec<DenseMatrix>,
    pub output: LatentOutput,
}

pub(crate) enum LayerInput<'a> {
    Features(&'a FeatureInput),
    Hidden(&'a DenseMatrix),
}

impl LayerInput<'_> {
    pub(crate) fn right_mul(&self, w: &DenseMatrix) -> Result<DenseMatrix> {
        match self {
            LayerInput::Features(x) => x.right_mul(w),
            LayerInput::Hidden(h) => h.matmul(w),
        }
    }

    pub(crate) fn t_mul(&self, g: &DenseMatrix) -> Result<DenseMatrix> {
        match self {
            LayerInput::Features(x) => x.t_mul(g),
            LayerInput::Hidden(h) => h.t_matmul(g),
        }
    }

    fn n_cols(&self) -> usize {
        match self {
            LayerInput::Features(x) => x.n_cols(),
            LayerInput::Hidden(h) => h.n_cols(),
        }
    }
}

fn apply_layer(
    input: &LayerInput<'_>,
    layer: &Layer,
    propagation: Option<&SparseMatrix>,
) -> Result<DenseMatrix> {
    if input.n_cols() != layer.weight.n_rows() {
        return Err(Error::shape(
            "encoder layer",
            format!(
                "input has {} columns, weight is {}x{}",
                input.n_cols(),
                layer.weight.n_rows(),
                layer.weight.n_cols()
            ),
        ));
    }
    let mut out = input.right_mul(&layer.weight)?;
    if let Some(s) = propagation {
        out = s.spmm(&out)?;
    }
    if let Some(b) = &layer.bias {
        out.add_row_vector(b);
    }
    Ok(out)
}

fn relu(x: &DenseMatrix) -> DenseMatrix {
    x.map(|v| v.max(0.0))
}

fn ensure_finite(m: &DenseMatrix, what: &str) -> Result<()> {
    if m.is_finite() {
        Ok(())
    } else {
        Err(Error::NumericFailure(format!("{what} has non-finite entries")))
    }
}

/// `z = mu + exp(log_sigma) ⊙ noise`.
pub fn reparameterize(
    mu: &DenseMatrix,
    log_sigma: &DenseMatrix,
    noise: &DenseMatrix,
) -> Result<DenseMatrix> {
    if mu.shape() != log_sigma.shape() || mu.shape() != noise.shape() {
        return Err(Error::shape(
            "reparameterize",
            format!("{:?}, {:?}, {:?}", mu.shape(), log_sigma.shape(), noise.shape()),
        ));
    }
    let data = mu
        .as_slice()
        .iter()
        .zip(log_sigma.as_slice())
        .zip(noise.as_slice())
        .map(|((m, ls), e)| m + ls.exp() * e)
        .collect();
    DenseMatrix::from_vec(mu.n_rows(), mu.n_cols(), data)
}

/// Runs the encoder stack, keeping what the backward pass needs.
///
/// With `noise = None` a variational encoder returns `z = mu`.
pub fn forward(
    x: &FeatureInput,
    propagation: Option<&SparseMatrix>,
    params: &ModelParams,
    noise: Option<&DenseMatrix>,
) -> Result<ForwardCache> {
    if params.layers.is_empty() {
        return Err(Error::ContractViolation("encoder has no layers".into()));
    }
    if let Some(s) = propagation {
        if !s.is_square() || s.n_rows() != x.n_rows() {
            return Err(Error::shape(
                "encode_gcn",
                format!("S is {}x{}, X has {} rows", s.n_rows(), s.n_cols(), x.n_rows()),
            ));
        }
    }
    let (body, head) = params.layers.split_at(params.layers.len() - 1);
    let mut hidden: Vec<DenseMatrix> = Vec::with_capacity(body.len());
    for layer in body {
        let input = match hidden.last() {
            Some(h) => LayerInput::Hidden(h),
            None => LayerInput::Features(x),
        };
        let h = relu(&apply_layer(&input, layer, propagation)?);
        hidden.push(h);
    }
    let last_input = match hidden.last() {
        Some(h) => LayerInput::Hidden(h),
        None => LayerInput::Features(x),
    };
    let out = apply_layer(&last_input, &head[0], propagation)?;
    ensure_finite(&out, "encoder output")?;

    let output = match &params.log_sigma {
        None => LatentOutput {
            z: out,
            mu: None,
            log_sigma: None,
            noise: None,
        },
        Some(ls_layer) => {
            let log_sigma = apply_layer(&last_input, ls_layer, propagation)?;
            ensure_finite(&log_sigma, "log_sigma")?;
            let z = match noise {
                Some(eps) => reparameterize(&out, &log_sigma, eps)?,
                None => out.clone(),
            };
            LatentOutput {
                z,
                mu: Some(out),
                log_sigma: Some(log_sigma),
                noise: noise.cloned(),
            }
        }
    };
    Ok(ForwardCache { hidden, output })
}

fn check_variant(params: &ModelParams, variant: Variant) -> Result<()> {
    if params.is_variational() != variant.is_variational() {
        return Err(Error::ContractViolation(format!(
            "params {} a log-sigma head but variant is {}",
            if params.is_variational() { "have" } else { "lack" },
            variant.display_name()
        )));
    }
    Ok(())
}

/// Linear encoder on already-propagated features `X̄`.
pub fn encode_linear(
    x_bar: &FeatureInput,
    params: &ModelParams,
    variant: Variant,
    noise: Option<&DenseMatrix>,
) -> Result<LatentOutput> {
    check_variant(params, variant)?;
    Ok(forward(x_bar, None, params, noise)?.output)
}

/// GCN encoder: every layer propagates with `S`.
pub fn encode_gcn(
    x: &FeatureInput,
    s: &SparseMatrix,
    params: &ModelParams,
    variant: Variant,
    noise: Option<&DenseMatrix>,
) -> Result<LatentOutput> {
    check_variant(params, variant)?;
    Ok(forward(x, Some(s), params, noise)?.output)
}
