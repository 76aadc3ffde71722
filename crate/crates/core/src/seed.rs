//! Seed derivation so that independent components (data, init, shuffling,
//! per-level networks) draw from unrelated streams.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// SplitMix64 finalizer over `seed` and a component tag.
pub fn derive(seed: u64, tag: u64) -> u64 {
    let mut z = seed ^ tag.wrapping_mul(0x9E37_79B9_7F4A_7C15).wrapping_add(0xD1B5_4A32_D192_ED03);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

pub fn stream(seed: u64, tag: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(derive(seed, tag))
}

pub(crate) mod tags {
    pub const DATA_TRAIN: u64 = 1;
    pub const DATA_TEST: u64 = 2;
    pub const INPUTS: u64 = 10;
    pub const TARGETS: u64 = 11;
    pub const CENSORING: u64 = 12;
    pub const INIT: u64 = 20;
    pub const SHUFFLE: u64 = 21;
    pub const DROPOUT: u64 = 22;
    pub const SPLIT: u64 = 30;
    pub const OVERLAY: u64 = 31;
    pub const LEVEL: u64 = 1000;
}
