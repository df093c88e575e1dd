//! Seed derivation. Every random draw in the crate comes from a `ChaCha8Rng`
//! whose seed is derived from the user seed plus a stream tag, so independent
//! consumers never share a generator.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// SplitMix64 finalizer.
fn mix(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Combines a base seed with any number of stream tags.
pub fn derive(seed: u64, tags: &[u64]) -> u64 {
    tags.iter().fold(mix(seed), |acc, &t| mix(acc ^ mix(t)))
}

pub fn rng(seed: u64, tags: &[u64]) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(derive(seed, tags))
}

// Stream tags, one per consumer.
pub(crate) const IBI: u64 = 1;
pub(crate) const NOISE: u64 = 2;
pub(crate) const AUGMENT: u64 = 3;
pub(crate) const WINDOWS: u64 = 4;
pub(crate) const FOLDS: u64 = 5;
pub(crate) const INIT: u64 = 6;
pub(crate) const SHUFFLE: u64 = 7;
pub(crate) const REPAD: u64 = 8;
