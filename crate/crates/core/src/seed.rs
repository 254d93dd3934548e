//! Seed derivation.
//!
//! Every random stream in a run is derived from the master seed through a
//! SplitMix64 fold, so a trial's randomness depends only on its identity and
//! never on execution order or worker count.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// Stream tags. Each consumer of trial randomness owns a distinct tag.
pub mod tag {
    pub const JITTER: u64 = 0x4a49_5454_4552;
    pub const LIGHTING: u64 = 0x4c49_4748_5400;
    pub const TEMPORAL: u64 = 0x5445_4d50_4f52;
    pub const ORACLE: u64 = 0x4f52_4143_4c45;
}

/// One round of the SplitMix64 finalizer.
pub const fn splitmix64(x: u64) -> u64 {
    let mut z = x.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// Folds `fields` into `seed`: `h = splitmix64(seed)`, then
/// `h = splitmix64(h ^ field)` for each field in order.
pub fn mix(seed: u64, fields: &[u64]) -> u64 {
    fields
        .iter()
        .fold(splitmix64(seed), |h, &f| splitmix64(h ^ f))
}

/// A ChaCha8 stream for `(seed, tag, index)`.
pub fn stream(seed: u64, tag: u64, index: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(mix(seed, &[tag, index]))
}
