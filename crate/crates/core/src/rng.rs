//! Seeded random streams.
//!
//! Every stochastic routine takes an explicit 64-bit seed. Independent streams
//! (trial `t` of a sweep, the dataset, the sampler) are derived from a base
//! seed by a splitmix64 mix, and each stream drives a ChaCha8 generator, so a
//! given `(base_seed, stream, index)` always replays the same draws no matter
//! which thread runs it.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub type StreamRng = ChaCha8Rng;

/// Stream tags used to separate the independent consumers of a base seed.
pub mod stream {
    pub const DATASET: u64 = 0x6461_7461;
    pub const SAMPLING: u64 = 0x7361_6d70;
    pub const PARTITION: u64 = 0x7061_7274;
    pub const PERTURB: u64 = 0x7065_7274;
    pub const POWER: u64 = 0x706f_7765;
}

fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// Derives the seed of stream `tag`, item `index`, from `base`.
pub fn derive_seed(base: u64, tag: u64, index: u64) -> u64 {
    splitmix64(splitmix64(base ^ splitmix64(tag)).wrapping_add(index))
}

pub fn rng_from_seed(seed: u64) -> StreamRng {
    ChaCha8Rng::seed_from_u64(seed)
}
