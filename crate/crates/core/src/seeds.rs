//! Seed derivation for reproducible, scheduling-independent randomness.
//!
//! Every stochastic stage derives its own stream from a master seed and a
//! list of integer tags (epoch, batch index, instance index, run index, …)
//! via SplitMix64 mixing. Results therefore never depend on the order in
//! which parallel work happens to complete.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// Stage tags, kept in one place so streams can never collide by accident.
pub mod tag {
    pub const PARAM_INIT: u64 = 1;
    pub const SAMPLE: u64 = 2;
    pub const REWARD: u64 = 3;
    pub const INIT_POP: u64 = 4;
    pub const INFER_SAMPLE: u64 = 5;
    pub const INFER_EVAL: u64 = 6;
    pub const FISHER: u64 = 7;
    pub const WALK: u64 = 8;
    pub const ELA_TRIAL: u64 = 9;
    pub const SUBSAMPLE: u64 = 10;
    pub const GRID_SEARCH: u64 = 11;
    pub const BENCH: u64 = 12;
    pub const INSTANCE: u64 = 13;
}

fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Mix a master seed with a tag path into a new 64-bit seed.
pub fn derive(master: u64, tags: &[u64]) -> u64 {
    let mut s = splitmix64(master ^ 0x6A09_E667_F3BC_C908);
    for &t in tags {
        s = splitmix64(s ^ splitmix64(t));
    }
    s
}

/// Deterministic RNG for a derived stream.
pub fn rng(master: u64, tags: &[u64]) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(derive(master, tags))
}

/// Deterministic RNG directly from a seed.
pub fn rng_from(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}
