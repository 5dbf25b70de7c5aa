//! Deterministic seed derivation for independent tasks.
//!
//! Every parallel task draws from its own stream seeded by
//! `derive_seed(master, task_index)`, so results never depend on which
//! worker picked up which task.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

const GOLDEN_GAMMA: u64 = 0x9e37_79b9_7f4a_7c15;

/// One round of the SplitMix64 finalizer.
pub fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(GOLDEN_GAMMA);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// Mixes a master seed with a task index into a 64-bit task seed.
pub fn derive_seed(master: u64, task_index: u64) -> u64 {
    splitmix64(master ^ splitmix64(task_index.wrapping_mul(GOLDEN_GAMMA) ^ 0x5851_f42d_4c95_7f2d))
}

/// The generator used throughout the crate.
pub fn rng_from_seed(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn task_rng(master: u64, task_index: u64) -> ChaCha8Rng {
    rng_from_seed(derive_seed(master, task_index))
}
