//! Encoders, the inner-product decoder, loss terms and parameter auditing.

mod config;
mod encoder;
mod loss;
mod params;

pub use config::{
    gcn_hidden_progression, param_count, ModelConfig, Variant, DEFAULT_HIDDEN, GCN_LATENT,
    MAX_GCN_LAYERS,
};
pub use encoder::{
    encode_gcn, encode_linear, forward, reparameterize, ForwardCache, LatentOutput,
};
pub(crate) use encoder::LayerInput;
pub use loss::{
    decode_inner_product, kl_divergence, kl_grad, reconstruction_loss,
    reconstruction_loss_and_grad, sigmoid, ReconstructionTarget,
};
pub use params::{
    checkpoint_bytes, parse_checkpoint, read_checkpoint, write_checkpoint, Layer, ModelParams,
    TensorRef,
};
