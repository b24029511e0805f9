//! Seed derivation.
//!
//! Every random stream in a run is addressed by a path of integers under one
//! master seed, e.g. `(replicate, imputation, fold)`. Streams are ChaCha8
//! generators keyed by a splitmix64 hash of the path, so a given path always
//! yields the same draws regardless of scheduling order.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub type Rng = ChaCha8Rng;

const GOLDEN: u64 = 0x9E37_79B9_7F4A_7C15;

#[inline]
fn splitmix(mut z: u64) -> u64 {
    z = z.wrapping_add(GOLDEN);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Hashes `base` together with `path` into a child seed.
pub fn derive(base: u64, path: &[u64]) -> u64 {
    let mut h = splitmix(base);
    for (depth, &p) in path.iter().enumerate() {
        h = splitmix(h ^ splitmix(p ^ ((depth as u64 + 1) << 56)));
    }
    h
}

pub fn rng(seed: u64) -> Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Stream tags used to keep derived seeds of different purposes apart.
pub mod tag {
    pub const PARTITION: u64 = 1;
    pub const IMPUTE: u64 = 2;
    pub const NAIVE: u64 = 3;
    pub const DATA: u64 = 4;
    pub const AMPUTE: u64 = 5;
    pub const REPLICATE: u64 = 6;
}
