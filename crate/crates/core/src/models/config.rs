use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Hidden widths of the linear encoders, last entry is the latent size.
pub const DEFAULT_HIDDEN: [usize; 2] = [32, 16];
/// Latent width the GCN progression halves down to.
pub const GCN_LATENT: usize = 16;
/// Deepest GCN stack the width progression supports.
pub const MAX_GCN_LAYERS: usize = 12;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Variant {
    /// Linear auto-encoder on precomputed `S^k X`.
    Lgae,
    /// Variational linear auto-encoder on precomputed `S^k X`.
    Lvgae,
    /// GCN encoder, one propagation per layer.
    Gae,
    /// Variational GCN encoder.
    Vgae,
}

impl Variant {
    pub const ALL: [Variant; 4] = [Variant::Lgae, Variant::Lvgae, Variant::Gae, Variant::Vgae];

    pub fn is_variational(self) -> bool {
        matches!(self, Variant::Lvgae | Variant::Vgae)
    }

    /// True for the variants whose propagation happens before the encoder.
    pub fn is_linear(self) -> bool {
        matches!(self, Variant::Lgae | Variant::Lvgae)
    }

    pub fn as_str(self) -> &'static str {
        match self {
            Variant::Lgae => "lgae",
            Variant::Lvgae => "lvgae",
            Variant::Gae => "gae",
            Variant::Vgae => "vgae",
        }
    }

    /// Name as printed in result tables.
    pub fn display_name(self) -> &'static str {
        match self {
            Variant::Lgae => "L-GAE",
            Variant::Lvgae => "L-VGAE",
            Variant::Gae => "GAE",
            Variant::Vgae => "VGAE",
        }
    }

    pub(crate) fn code(self) -> u8 {
        match self {
            Variant::Lgae => 0,
            Variant::Lvgae => 1,
            Variant::Gae => 2,
            Variant::Vgae => 3,
        }
    }

    pub(crate) fn from_code(code: u8) -> Option<Self> {
        Variant::ALL.get(code as usize).copied()
    }
}

impl fmt::Display for Variant {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Variant {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().replace('-', "").as_str() {
            "lgae" => Ok(Variant::Lgae),
            "lvgae" => Ok(Variant::Lvgae),
            "gae" => Ok(Variant::Gae),
            "vgae" => Ok(Variant::Vgae),
            _ => Err(Error::Config(format!(
                "unknown variant '{s}' (expected lgae, lvgae, gae or vgae)"
            ))),
        }
    }
}

/// Widths for a `k`-layer GCN encoder: powers of two ending at 16,
/// e.g. `k = 3` gives `[64, 32, 16]`.
pub fn gcn_hidden_progression(k: usize) -> Result<Vec<usize>> {
    if k == 0 || k > MAX_GCN_LAYERS {
        return Err(Error::Config(format!(
            "GCN encoders support 1..={MAX_GCN_LAYERS} layers, got k = {k}"
        )));
    }
    Ok((0..k).map(|i| GCN_LATENT << (k - 1 - i)).collect())
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct ModelConfig {
    pub variant: Variant,
    pub input_dim: usize,
    pub hidden_dims: Vec<usize>,
    /// Propagation hops. For GCN variants this is also the layer count.
    pub k: usize,
    pub seed: u64,
}

impl ModelConfig {
    /// Default architecture: `[32, 16]` for the linear variants, the halving
    /// progression of length `k` for the GCN variants.
    pub fn new(variant: Variant, input_dim: usize, k: usize, seed: u64) -> Result<Self> {
        let hidden_dims = if variant.is_linear() {
            DEFAULT_HIDDEN.to_vec()
        } else {
            gcn_hidden_progression(k)?
        };
        let cfg = Self {
            variant,
            input_dim,
            hidden_dims,
            k,
            seed,
        };
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        if self.input_dim == 0 {
            return Err(Error::Config("input_dim must be positive".into()));
        }
        if self.hidden_dims.is_empty() || self.hidden_dims.contains(&0) {
            return Err(Error::Config(
                "hidden_dims must be non-empty with positive widths".into(),
            ));
        }
        if !self.variant.is_linear() {
            if self.k == 0 || self.k > MAX_GCN_LAYERS {
                return Err(Error::Config(format!(
                    "{} needs 1..={MAX_GCN_LAYERS} layers, got k = {}",
                    self.variant.display_name(),
                    self.k
                )));
            }
            if self.hidden_dims.len() != self.k {
                return Err(Error::Config(format!(
                    "{} with k = {} needs {} hidden widths, got {}",
                    self.variant.display_name(),
                    self.k,
                    self.k,
                    self.hidden_dims.len()
                )));
            }
        }
        Ok(())
    }

    pub fn latent_dim(&self) -> usize {
        *self.hidden_dims.last().expect("validated non-empty")
    }

    /// Linear layers carry biases, GCN layers do not.
    pub fn has_bias(&self) -> bool {
        self.variant.is_linear()
    }

    /// `(fan_in, fan_out)` of every layer in order; the variational
    /// log-sigma head shares the last entry.
    pub fn layer_shapes(&self) -> Vec<(usize, usize)> {
        let mut fan_in = self.input_dim;
        self.hidden_dims
            .iter()
            .map(|&h| {
                let shape = (fan_in, h);
                fan_in = h;
                shape
            })
            .collect()
    }
}

/// Number of trainable scalars in the encoder. The inner-product decoder has none.
pub fn param_count(config: &ModelConfig) -> Result<usize> {
    config.validate()?;
    let bias = usize::from(config.has_bias());
    let shapes = config.layer_shapes();
    let per_layer = |&(i, o): &(usize, usize)| i * o + bias * o;
    let body: usize = shapes[..shapes.len() - 1].iter().map(per_layer).sum();
    let head = per_layer(shapes.last().unwrap());
    let heads = if config.variant.is_variational() { 2 } else { 1 };
    Ok(body + heads * head)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn count(v: Variant, d: usize, k: usize) -> usize {
        param_count(&ModelConfig::new(v, d, k, 0).unwrap()).unwrap()
    }

    #[test]
    fn reference_counts() {
        assert_eq!(count(Variant::Lgae, 1433, 2), 46416);
        assert_eq!(count(Variant::Lvgae, 500, 2), 17088);
        assert_eq!(count(Variant::Vgae, 3703, 1), 118496);
        assert_eq!(count(Variant::Vgae, 1433, 3), 94784);
        assert_eq!(count(Variant::Vgae, 1433, 3), 1433 * 64 + 64 * 32 + 2 * 32 * 16);
    }

    #[test]
    fn closed_forms() {
        for d in [1, 7, 500, 1433, 3703] {
            assert_eq!(count(Variant::Vgae, d, 1), 2 * d * 16);
            assert_eq!(count(Variant::Vgae, d, 3), 64 * d + 2048 + 1024);
            assert_eq!(count(Variant::Gae, d, 1), d * 16);
            assert_eq!(count(Variant::Lgae, d, 5), (d * 32 + 32) + (32 * 16 + 16));
            assert_eq!(count(Variant::Lvgae, d, 0), (d * 32 + 32) + 2 * (32 * 16 + 16));
        }
    }

    #[test]
    fn progression_and_limits() {
        assert_eq!(gcn_hidden_progression(1).unwrap(), vec![16]);
        assert_eq!(gcn_hidden_progression(2).unwrap(), vec![32, 16]);
        assert_eq!(
            gcn_hidden_progression(7).unwrap(),
            vec![1024, 512, 256, 128, 64, 32, 16]
        );
        assert!(gcn_hidden_progression(0).is_err());
        assert!(matches!(
            ModelConfig::new(Variant::Vgae, 10, 13, 0),
            Err(Error::Config(_))
        ));
        let mut cfg = ModelConfig::new(Variant::Gae, 10, 2, 0).unwrap();
        cfg.hidden_dims = vec![16];
        assert!(cfg.validate().is_err());
    }

    #[test]
    fn variant_parsing() {
        assert_eq!("L-VGAE".parse::<Variant>().unwrap(), Variant::Lvgae);
        assert_eq!("gae".parse::<Variant>().unwrap(), Variant::Gae);
        assert!("gcn".parse::<Variant>().is_err());
        for v in Variant::ALL {
            assert_eq!(Variant::from_code(v.code()), Some(v));
            assert_eq!(v.as_str().parse::<Variant>().unwrap(), v);
        }
    }
}
