//! Deterministic RNG stream derivation.
//!
//! Every randomized operation takes an [`RngSeed`] and derives child streams
//! by index (symbol, trial, grid cell, ...). Results are therefore identical
//! across execution orders and thread counts: a symbol's stream depends only
//! on the seed path leading to it, never on how many draws other symbols
//! consumed.

use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// A derivable seed; cheap to copy, never mutated in place.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct RngSeed(u64);

impl RngSeed {
    pub fn new(seed: u64) -> Self {
        RngSeed(seed)
    }

    /// Child seed for a tagged subtree (splitmix64 over seed and tag).
    pub fn child(self, tag: u64) -> Self {
        RngSeed(mix(self.0 ^ tag.wrapping_mul(0x9e37_79b9_7f4a_7c15)))
    }

    /// Concrete generator for this node of the seed tree.
    pub fn rng(self) -> ChaCha8Rng {
        ChaCha8Rng::seed_from_u64(self.0)
    }
}

fn mix(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}
