//! Analytic gradients for all four encoder variants.

use serde::{Deserialize, Serialize};

use crate::dense::DenseMatrix;
use crate::error::{Error, Result};
use crate::models::{
    forward, kl_divergence, kl_grad, reconstruction_loss_and_grad, ForwardCache, Layer,
    LayerInput, ModelParams, ReconstructionTarget,
};
use crate::propagation::FeatureInput;
use crate::sparse::SparseMatrix;

/// Weights of the two loss terms. The KL term only applies to variational params.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Objective {
    pub reconstruction: f64,
    pub kl: f64,
}

impl Objective {
    /// Training objective for an `n`-node graph. The reconstruction term is a
    /// mean over `n²` pairs while `kl_divergence` is a mean over `n` nodes, so
    /// the KL term gets weight `1/n` to keep the two on the same per-pair scale.
    pub fn for_nodes(n: usize) -> Self {
        Self {
            reconstruction: 1.0,
            kl: 1.0 / n.max(1) as f64,
        }
    }
}

impl Default for Objective {
    fn default() -> Self {
        Self {
            reconstruction: 1.0,
            kl: 1.0,
        }
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct LossParts {
    pub reconstruction: f64,
    pub kl: f64,
}

impl LossParts {
    pub fn total(&self, objective: &Objective) -> f64 {
        objective.reconstruction * self.reconstruction + objective.kl * self.kl
    }
}

/// Loss terms of a cached forward pass.
pub fn loss_parts(cache: &ForwardCache, target: &ReconstructionTarget<'_>) -> Result<LossParts> {
    let out = &cache.output;
    let (reconstruction, _) = reconstruction_loss_and_grad(&out.z, target, false)?;
    let kl = match (&out.mu, &out.log_sigma) {
        (Some(mu), Some(ls)) => kl_divergence(mu, ls)?,
        _ => 0.0,
    };
    Ok(LossParts { reconstruction, kl })
}

/// Gradient of one layer `out = P·(H W) + b` given `∂/∂out`.
/// Returns the layer gradient and, for hidden inputs, `∂/∂H`.
fn layer_backward(
    input: &LayerInput<'_>,
    layer: &Layer,
    propagation: Option<&SparseMatrix>,
    d_out: &DenseMatrix,
) -> Result<(Layer, Option<DenseMatrix>)> {
    let bias = layer.bias.as_ref().map(|_| d_out.column_sums());
    // S is symmetric, so Sᵀ · d_out = S · d_out.
    let d_pre = match propagation {
        Some(s) => s.spmm(d_out)?,
        None => d_out.clone(),
    };
    let weight = input.t_mul(&d_pre)?;
    let d_input = match input {
        LayerInput::Hidden(_) => Some(d_pre.matmul_t(&layer.weight)?),
        LayerInput::Features(_) => None,
    };
    Ok((Layer { weight, bias }, d_input))
}

fn add_into(acc: &mut DenseMatrix, other: &DenseMatrix) {
    for (a, b) in acc.as_mut_slice().iter_mut().zip(other.as_slice()) {
        *a += b;
    }
}

/// Exact gradients of `objective` for the forward pass held in `cache`,
/// along with the loss terms at that point.
///
/// `x` and `propagation` must be the inputs the cache was computed from.
pub fn backward(
    x: &FeatureInput,
    propagation: Option<&SparseMatrix>,
    params: &ModelParams,
    cache: Option<&ForwardCache>,
    target: &ReconstructionTarget<'_>,
    objective: &Objective,
) -> Result<(LossParts, ModelParams)> {
    let cache = cache.ok_or_else(|| {
        Error::ContractViolation("backward needs the activations of a forward pass".into())
    })?;
    let n_layers = params.layers.len();
    if n_layers == 0 || cache.hidden.len() + 1 != n_layers {
        return Err(Error::ContractViolation(format!(
            "forward cache holds {} hidden activations for {n_layers} layers",
            cache.hidden.len()
        )));
    }
    if let Some(s) = propagation {
        if !s.is_symmetric() {
            return Err(Error::ContractViolation(
                "GCN backward assumes a symmetric propagation operator".into(),
            ));
        }
    }
    let out = &cache.output;
    let (reconstruction, d_z) = reconstruction_loss_and_grad(&out.z, target, true)?;
    let mut parts = LossParts {
        reconstruction,
        kl: 0.0,
    };
    let d_z = d_z.expect("gradient requested").map(|g| g * objective.reconstruction);

    let input_of = |layer: usize| match layer {
        0 => LayerInput::Features(x),
        l => LayerInput::Hidden(&cache.hidden[l - 1]),
    };
    let last = n_layers - 1;
    let mut grads = params.zeros_like();

    let (d_head, d_log_sigma) = match (&out.mu, &out.log_sigma, &params.log_sigma) {
        (Some(mu), Some(ls), Some(_)) => {
            parts.kl = kl_divergence(mu, ls)?;
            let (kl_mu, kl_ls) = kl_grad(mu, ls)?;
            let mut d_mu = d_z.clone();
            for (d, k) in d_mu.as_mut_slice().iter_mut().zip(kl_mu.as_slice()) {
                *d += objective.kl * k;
            }
            // z = mu + exp(ls) ⊙ eps, so ∂z/∂ls = exp(ls) ⊙ eps.
            let mut d_ls = kl_ls.map(|k| objective.kl * k);
            if let Some(eps) = &out.noise {
                for (((d, g), l), e) in d_ls
                    .as_mut_slice()
                    .iter_mut()
                    .zip(d_z.as_slice())
                    .zip(ls.as_slice())
                    .zip(eps.as_slice())
                {
                    *d += g * l.exp() * e;
                }
            }
            (d_mu, Some(d_ls))
        }
        (None, None, None) => (d_z, None),
        _ => {
            return Err(Error::ContractViolation(
                "forward cache and params disagree on the log-sigma head".into(),
            ))
        }
    };

    let input = input_of(last);
    let (g, mut d_hidden) = layer_backward(&input, &params.layers[last], propagation, &d_head)?;
    grads.layers[last] = g;
    if let (Some(d_ls), Some(ls_layer)) = (&d_log_sigma, &params.log_sigma) {
        let (g, d_h) = layer_backward(&input, ls_layer, propagation, d_ls)?;
        grads.log_sigma = Some(g);
        if let (Some(acc), Some(d_h)) = (d_hidden.as_mut(), d_h) {
            add_into(acc, &d_h);
        }
    }

    for l in (0..last).rev() {
        let mut d_act = d_hidden.take().expect("hidden layers receive a gradient");
        // ReLU: the post-activation is positive exactly where the pre-activation is.
        for (d, h) in d_act.as_mut_slice().iter_mut().zip(cache.hidden[l].as_slice()) {
            if *h <= 0.0 {
                *d = 0.0;
            }
        }
        let (g, d_h) = layer_backward(&input_of(l), &params.layers[l], propagation, &d_act)?;
        grads.layers[l] = g;
        d_hidden = d_h;
    }
    Ok((parts, grads))
}

/// Forward pass, loss terms and gradients in one call.
pub fn loss_and_grad(
    x: &FeatureInput,
    propagation: Option<&SparseMatrix>,
    params: &ModelParams,
    noise: Option<&DenseMatrix>,
    target: &ReconstructionTarget<'_>,
    objective: &Objective,
) -> Result<(LossParts, ModelParams)> {
    let cache = forward(x, propagation, params, noise)?;
    backward(x, propagation, params, Some(&cache), target, objective)
}
