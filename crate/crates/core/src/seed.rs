//! Deterministic sub-seed derivation.
//!
//! Every stochastic routine takes an explicit `u64` seed. Child streams
//! (replications, candidate fits, shards) derive their seeds from the parent
//! seed and a path of stream indices, so results never depend on scheduling.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub type Rng = ChaCha8Rng;

/// Stream tags used across the crate.
pub mod tag {
    pub const DATA: u64 = 0xDA7A;
    pub const FIT: u64 = 0xF17;
    pub const INIT: u64 = 0x1A17;
    pub const STEPS: u64 = 0x57E9;
    pub const FINAL_ELBO: u64 = 0xE1B0;
    pub const MC: u64 = 0x3C;
    pub const MH: u64 = 0x3A;
    pub const SHARD: u64 = 0x5A4D;
    pub const TRIAL: u64 = 0x7A1;
    pub const HELLINGER: u64 = 0x4E11;
}

#[inline]
fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Derives a child seed from `seed` and a path of stream indices.
pub fn derive(seed: u64, path: &[u64]) -> u64 {
    path.iter().fold(splitmix64(seed), |acc, &p| {
        splitmix64(acc ^ splitmix64(p.wrapping_add(0x632B_E59B_D9B4_E019)))
    })
}

pub fn rng(seed: u64) -> Rng {
    ChaCha8Rng::seed_from_u64(seed)
}
