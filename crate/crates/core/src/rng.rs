//! Deterministic RNG substreams.
//!
//! Every random draw comes from a ChaCha8 stream whose seed is derived from
//! a root seed, a purpose label, and integer/string coordinates. Streams for
//! different coordinates are independent, so work can be split across
//! threads without changing results.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use sha2::{Digest, Sha256};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct SeedTree {
    root: u64,
}

impl SeedTree {
    pub fn new(root: u64) -> Self {
        Self { root }
    }

    pub fn root(&self) -> u64 {
        self.root
    }

    /// Stream for `(label, index)`.
    pub fn stream(&self, label: &str, index: u64) -> ChaCha8Rng {
        self.stream_for(label, index, "")
    }

    /// Stream for `(label, index, key)`, e.g. `("rollout", step, prompt_id)`.
    pub fn stream_for(&self, label: &str, index: u64, key: &str) -> ChaCha8Rng {
        let mut h = Sha256::new();
        h.update(self.root.to_le_bytes());
        for part in [label.as_bytes(), key.as_bytes()] {
            h.update((part.len() as u64).to_le_bytes());
            h.update(part);
        }
        h.update(index.to_le_bytes());
        ChaCha8Rng::from_seed(h.finalize().into())
    }
}
