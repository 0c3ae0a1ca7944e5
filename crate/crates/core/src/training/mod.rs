//! Full-batch training loop.

mod adam;
mod backward;

use std::path::Path;
use std::time::Instant;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

pub use adam::{adam_step, AdamConfig, AdamState};
pub use backward::{backward, loss_and_grad, loss_parts, LossParts, Objective};

use crate::data::graph_digest;
use crate::dense::DenseMatrix;
use crate::error::{Error, Result};
use crate::graph::{adjacency_from_edges, normalized_operator, Edge, GraphDataset};
use crate::linkpred::{evaluate, EdgeSplit, MetricResult};
use crate::models::{forward, ModelConfig, ModelParams, ReconstructionTarget, Variant};
use crate::propagation::{cached_propagate, propagate, CacheKey, FeatureInput};
use crate::sparse::SparseMatrix;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TrainConfig {
    pub epochs: usize,
    pub learning_rate: f64,
    pub adam_beta1: f64,
    pub adam_beta2: f64,
    pub adam_eps: f64,
    /// Seeds the variational noise stream.
    pub seed: u64,
    pub eval_every: usize,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            epochs: 200,
            learning_rate: 0.01,
            adam_beta1: 0.9,
            adam_beta2: 0.999,
            adam_eps: 1e-8,
            seed: 0,
            eval_every: 10,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        let ok = self.epochs >= 1
            && self.learning_rate > 0.0
            && self.learning_rate.is_finite()
            && self.adam_beta1 > 0.0
            && self.adam_beta1 < 1.0
            && self.adam_beta2 > 0.0
            && self.adam_beta2 < 1.0
            && self.adam_eps > 0.0;
        if !ok {
            return Err(Error::Config(format!("invalid training config {self:?}")));
        }
        Ok(())
    }

    pub fn adam(&self) -> AdamConfig {
        AdamConfig {
            learning_rate: self.learning_rate,
            beta1: self.adam_beta1,
            beta2: self.adam_beta2,
            eps: self.adam_eps,
        }
    }
}

/// Everything the loop needs, derived from the training edges only.
#[derive(Clone, Debug)]
pub struct TrainInputs {
    pub variant: Variant,
    pub k: usize,
    pub featureless: bool,
    /// `X̄ = S^k X` for the linear variants, raw `X` for the GCN ones.
    pub features: FeatureInput,
    /// `S` for the GCN variants.
    pub propagation: Option<SparseMatrix>,
    pub a_train: SparseMatrix,
    pub val_edges: Vec<Edge>,
    pub val_negatives: Vec<Edge>,
    pub test_edges: Vec<Edge>,
    pub test_negatives: Vec<Edge>,
}

impl TrainInputs {
    /// Builds `A_train` and `S` from the split's training edges and prepares
    /// the encoder input. Featureless inputs stay implicit; dense `X̄` is
    /// cached under `cache_dir` when one is given.
    pub fn prepare(
        dataset: &GraphDataset,
        split: &EdgeSplit,
        variant: Variant,
        k: usize,
        featureless: bool,
        cache_dir: Option<&Path>,
    ) -> Result<Self> {
        split.validate_against(dataset)?;
        let train_graph = split.train_graph(dataset)?;
        let a_train = adjacency_from_edges(&train_graph)?;
        let s = normalized_operator(&a_train)?;
        let hops = if variant.is_linear() { k } else { 0 };
        let features = if featureless {
            FeatureInput::implicit_identity(s.clone(), hops)?
        } else {
            let x = dataset.features().ok_or_else(|| {
                Error::Config(format!(
                    "dataset '{}' has no features; use the featureless stream",
                    dataset.name
                ))
            })?;
            let x_bar = match cache_dir {
                Some(dir) if hops > 0 => {
                    std::fs::create_dir_all(dir)?;
                    let key = CacheKey {
                        content_hash: graph_digest(&train_graph),
                        k: hops,
                        featureless: false,
                    };
                    cached_propagate(dir, &key, || propagate(&s, x, hops))?
                }
                _ => propagate(&s, x, hops)?,
            };
            FeatureInput::Dense(x_bar)
        };
        Ok(Self {
            variant,
            k,
            featureless,
            features,
            propagation: (!variant.is_linear()).then_some(s),
            a_train,
            val_edges: split.val_edges.clone(),
            val_negatives: split.val_negatives.clone(),
            test_edges: split.test_edges.clone(),
            test_negatives: split.test_negatives.clone(),
        })
    }

    pub fn num_nodes(&self) -> usize {
        self.a_train.n_rows()
    }

    pub fn input_dim(&self) -> usize {
        self.features.n_cols()
    }

    /// Model config matching these inputs.
    pub fn model_config(&self, seed: u64) -> Result<ModelConfig> {
        ModelConfig::new(self.variant, self.input_dim(), self.k, seed)
    }

    /// Latent readout used for scoring: `mu` for the variational variants.
    pub fn embed(&self, params: &ModelParams) -> Result<DenseMatrix> {
        let cache = forward(&self.features, self.propagation.as_ref(), params, None)?;
        Ok(cache.output.embedding().clone())
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EpochLoss {
    pub epoch: usize,
    pub reconstruction: f64,
    pub kl: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EvalPoint {
    pub epoch: usize,
    pub val: MetricResult,
}

/// Choices the method leaves open, recorded with every run.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Provenance {
    pub learning_rate: f64,
    pub weight_decay: f64,
    pub validation_used_for_selection: bool,
    pub latent_readout: String,
    pub noise_resampled_every_epoch: bool,
    pub kl_weight: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TrainReport {
    pub variant: Variant,
    pub k: usize,
    pub featureless: bool,
    pub model: ModelConfig,
    pub train: TrainConfig,
    pub num_params: usize,
    pub losses: Vec<EpochLoss>,
    pub evaluations: Vec<EvalPoint>,
    pub final_val: Option<MetricResult>,
    pub final_test: Option<MetricResult>,
    pub provenance: Provenance,
    /// Path of the final checkpoint, filled in by whoever writes it.
    pub checkpoint: Option<String>,
    /// Kept out of the JSON so reports from identical runs are byte-identical.
    #[serde(skip)]
    pub wall_time_secs: f64,
}

impl TrainReport {
    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }
}

pub struct TrainOutcome {
    pub report: TrainReport,
    pub params: ModelParams,
}

fn metrics_or_none(z: &DenseMatrix, pos: &[Edge], neg: &[Edge]) -> Result<Option<MetricResult>> {
    if pos.is_empty() || neg.is_empty() {
        return Ok(None);
    }
    evaluate(z, pos, neg).map(Some)
}

fn standard_normal(rng: &mut ChaCha8Rng, rows: usize, cols: usize) -> DenseMatrix {
    DenseMatrix::from_fn(rows, cols, |_, _| StandardNormal.sample(rng))
}

/// Runs `train_config.epochs` full-batch Adam steps on the training adjacency.
///
/// Validation metrics are recorded every `eval_every` epochs and never feed
/// back into training. The noise stream is seeded from `train_config.seed`
/// and drawn once per epoch for the variational variants only.
pub fn train(
    inputs: &TrainInputs,
    model_config: &ModelConfig,
    train_config: &TrainConfig,
) -> Result<TrainOutcome> {
    let started = Instant::now();
    train_config.validate()?;
    model_config.validate()?;
    if model_config.variant != inputs.variant || model_config.input_dim != inputs.input_dim() {
        return Err(Error::ContractViolation(format!(
            "model config ({}, input dim {}) does not match prepared inputs ({}, input dim {})",
            model_config.variant,
            model_config.input_dim,
            inputs.variant,
            inputs.input_dim()
        )));
    }
    let target = ReconstructionTarget::new(&inputs.a_train)?;
    let objective = Objective::for_nodes(inputs.num_nodes());
    let adam = train_config.adam();
    let mut params = ModelParams::init(model_config)?;
    let mut state = AdamState::new(&params);
    let mut noise_rng = ChaCha8Rng::seed_from_u64(train_config.seed);
    let (n, latent) = (inputs.num_nodes(), params.latent_dim());
    let prop = inputs.propagation.as_ref();

    let mut losses = Vec::with_capacity(train_config.epochs);
    let mut evaluations = Vec::new();
    for epoch in 1..=train_config.epochs {
        let noise = params
            .is_variational()
            .then(|| standard_normal(&mut noise_rng, n, latent));
        let (parts, grads) =
            loss_and_grad(&inputs.features, prop, &params, noise.as_ref(), &target, &objective)?;
        adam_step(&mut params, &grads, &mut state, epoch as u64, &adam)?;
        losses.push(EpochLoss {
            epoch,
            reconstruction: parts.reconstruction,
            kl: parts.kl,
        });
        let eval_due = train_config.eval_every > 0 && epoch % train_config.eval_every == 0;
        if eval_due || epoch == train_config.epochs {
            let z = inputs.embed(&params)?;
            if let Some(val) = metrics_or_none(&z, &inputs.val_edges, &inputs.val_negatives)? {
                evaluations.push(EvalPoint { epoch, val });
            }
        }
    }

    let z = inputs.embed(&params)?;
    let report = TrainReport {
        variant: model_config.variant,
        k: model_config.k,
        featureless: inputs.featureless,
        model: model_config.clone(),
        train: train_config.clone(),
        num_params: params.num_scalars(),
        losses,
        evaluations,
        final_val: metrics_or_none(&z, &inputs.val_edges, &inputs.val_negatives)?,
        final_test: metrics_or_none(&z, &inputs.test_edges, &inputs.test_negatives)?,
        provenance: Provenance {
            learning_rate: train_config.learning_rate,
            weight_decay: 0.0,
            validation_used_for_selection: false,
            latent_readout: "mu".into(),
            noise_resampled_every_epoch: true,
            kl_weight: objective.kl,
        },
        checkpoint: None,
        wall_time_secs: started.elapsed().as_secs_f64(),
    };
    Ok(TrainOutcome { report, params })
}
