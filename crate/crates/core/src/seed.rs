//! Deterministic seed derivation.
//!
//! Every stochastic stage derives its RNG from a base seed plus a stage
//! label, so independent stages stay decoupled: changing how many samples one
//! stage draws never perturbs another.

use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;
use sha2::{Digest, Sha256};

/// Derive a child seed from a base seed and a label.
pub fn derive(base: u64, label: &str) -> u64 {
    let mut hasher = Sha256::new();
    hasher.update(base.to_le_bytes());
    hasher.update(label.as_bytes());
    let digest = hasher.finalize();
    u64::from_le_bytes(digest[..8].try_into().unwrap())
}

/// Deterministic RNG for a (base seed, label) pair.
pub fn rng(base: u64, label: &str) -> ChaCha8Rng {
    let mut hasher = Sha256::new();
    hasher.update(base.to_le_bytes());
    hasher.update(label.as_bytes());
    let digest = hasher.finalize();
    let mut key = [0u8; 32];
    key.copy_from_slice(&digest);
    ChaCha8Rng::from_seed(key)
}

/// RNG directly from a u64 seed.
pub fn rng_from(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::Rng;

    #[test]
    fn derivation_is_stable_and_label_sensitive() {
        assert_eq!(derive(7, "agents"), derive(7, "agents"));
        assert_ne!(derive(7, "agents"), derive(7, "aggregator"));
        assert_ne!(derive(7, "agents"), derive(8, "agents"));
    }

    #[test]
    fn rng_streams_are_reproducible() {
        let a: Vec<u64> = rng(3, "x").sample_iter(rand::distributions::Standard).take(4).collect();
        let b: Vec<u64> = rng(3, "x").sample_iter(rand::distributions::Standard).take(4).collect();
        assert_eq!(a, b);
    }
}
