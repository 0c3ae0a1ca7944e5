//! Per-stage seeds derived from one master seed.
//!
//! Each randomized stage (edge split, weight init, variational noise, ...)
//! hashes the master seed together with its own label, so adding or changing
//! one stage never shifts another stage's random stream.

use sha2::{Digest, Sha256};

pub const SPLIT: &str = "split";
pub const INIT: &str = "init";
pub const NOISE: &str = "noise";

pub fn derive_seed(master: u64, label: &str) -> u64 {
    let mut h = Sha256::new();
    h.update(b"lgae-seed\0");
    h.update(master.to_le_bytes());
    h.update(label.as_bytes());
    let digest = h.finalize();
    u64::from_le_bytes(digest[..8].try_into().unwrap())
}
