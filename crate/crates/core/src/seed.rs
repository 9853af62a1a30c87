//! Named sub-seeds, so every random stream in a run derives from one seed.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use sha2::{Digest, Sha256};

/// First eight bytes of `SHA-256(seed ‖ purpose)`.
pub fn derive_seed(seed: u64, purpose: &str) -> u64 {
    let mut h = Sha256::new();
    h.update(seed.to_le_bytes());
    h.update(purpose.as_bytes());
    let digest = h.finalize();
    u64::from_le_bytes(digest[..8].try_into().expect("digest is 32 bytes"))
}

/// Per-item seed for batch work, independent of scheduling order.
pub fn item_seed(seed: u64, purpose: &str, index: usize) -> u64 {
    derive_seed(seed, &format!("{purpose}#{index}"))
}

pub fn rng_for(seed: u64, purpose: &str) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(derive_seed(seed, purpose))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn purposes_and_indices_separate_streams() {
        assert_eq!(derive_seed(7, "shuffle"), derive_seed(7, "shuffle"));
        assert_ne!(derive_seed(7, "shuffle"), derive_seed(7, "kmeans"));
        assert_ne!(derive_seed(7, "shuffle"), derive_seed(8, "shuffle"));
        assert_ne!(item_seed(1, "x", 0), item_seed(1, "x", 1));
    }
}
