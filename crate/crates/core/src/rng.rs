//! Seeded, purpose-splittable random streams.
//!
//! Every consumer of randomness derives its own stream from a root seed and
//! a purpose string, so adding a new consumer never perturbs existing ones.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use sha2::{Digest, Sha256};

pub type PipelineRng = ChaCha8Rng;

pub fn rng_for(seed: u64, purpose: &str) -> PipelineRng {
    let mut hasher = Sha256::new();
    hasher.update(seed.to_le_bytes());
    hasher.update((purpose.len() as u64).to_le_bytes());
    hasher.update(purpose.as_bytes());
    let digest: [u8; 32] = hasher.finalize().into();
    ChaCha8Rng::from_seed(digest)
}

/// Hex SHA-256 of `bytes`.
pub fn sha256_hex(bytes: impl AsRef<[u8]>) -> String {
    hex::encode(Sha256::digest(bytes.as_ref()))
}
