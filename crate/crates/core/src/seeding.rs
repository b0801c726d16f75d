//! Deterministic random streams.
//!
//! Every independent task draws from its own ChaCha stream whose seed is a
//! stable hash of `(master_seed, task_index)`. Results therefore depend only
//! on the master seed, never on scheduling or the number of worker threads.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// The random stream type used throughout the crate.
pub type Stream = ChaCha8Rng;

fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Stable hash of a master seed and a task index.
pub fn derive_seed(master: u64, task: u64) -> u64 {
    splitmix64(splitmix64(master) ^ splitmix64(task.wrapping_add(0x632B_E59B_D9B4_E019)))
}

/// Stream seeded directly from `seed`.
pub fn stream(seed: u64) -> Stream {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Stream for task `task` under `master`.
pub fn task_stream(master: u64, task: u64) -> Stream {
    stream(derive_seed(master, task))
}
