//! Deterministic seed derivation. Every random stream in the crate is a
//! `ChaCha8Rng` whose seed is a pure function of the run's base seed and a
//! stable task or episode index, so results do not depend on scheduling.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub type SimRng = ChaCha8Rng;

pub fn rng_from_seed(seed: u64) -> SimRng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Seed of episode `index` under base seed `base`: `base ⊕ index`.
pub fn episode_seed(base: u64, index: u64) -> u64 {
    base ^ index
}

/// Seed of a task (matrix, perturbation point, chunk) under `base`. Mixed so
/// that episode seeds derived from different tasks do not collide.
pub fn task_seed(base: u64, task: u64) -> u64 {
    splitmix64(base ^ splitmix64(task))
}

fn splitmix64(x: u64) -> u64 {
    let mut z = x.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}
