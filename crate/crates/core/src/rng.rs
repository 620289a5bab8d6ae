//! Deterministic random streams derived from one user seed.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub type TaskRng = ChaCha8Rng;

fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Seed for the `task`-th independent stream under `master`.
pub fn derive_seed(master: u64, task: u64) -> u64 {
    splitmix64(splitmix64(master) ^ splitmix64(task.wrapping_add(0x5851_F42D_4C95_7F2D)))
}

pub fn task_rng(master: u64, task: u64) -> TaskRng {
    ChaCha8Rng::seed_from_u64(derive_seed(master, task))
}
