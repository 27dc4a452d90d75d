//! Seed derivation. Every randomised task gets its own ChaCha8 stream whose
//! seed is `splitmix64(root ^ splitmix64(fnv1a(label) + index))`, so results are
//! reproducible from the single root seed and independent of scheduling.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub type TaskRng = ChaCha8Rng;

pub fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

fn fnv1a(label: &str) -> u64 {
    label.bytes().fold(0xcbf2_9ce4_8422_2325u64, |h, b| {
        (h ^ b as u64).wrapping_mul(0x0100_0000_01b3)
    })
}

/// Seed for task `index` of the stream named `label`.
pub fn derive_seed(root: u64, label: &str, index: u64) -> u64 {
    splitmix64(root ^ splitmix64(fnv1a(label).wrapping_add(index)))
}

pub fn task_rng(root: u64, label: &str, index: u64) -> TaskRng {
    TaskRng::seed_from_u64(derive_seed(root, label, index))
}
