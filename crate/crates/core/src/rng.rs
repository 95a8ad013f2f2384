//! Random number plumbing shared by every sampler.

use rand::SeedableRng;

/// The generator used for all simulation. ChaCha8 keeps streams portable
/// across platforms and crate versions, so seeds are reproducible tokens.
pub type SimRng = rand_chacha::ChaCha8Rng;

pub fn rng_from_seed(seed: u64) -> SimRng {
    SimRng::seed_from_u64(seed)
}

/// SplitMix64 finalizer. A bijection on `u64`.
pub fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Seed for replicate `index` under `root`. Distinct indices give distinct
/// seeds for a fixed root, independent of how replicates are scheduled.
pub fn replicate_seed(root: u64, index: u64) -> u64 {
    splitmix64(splitmix64(root) ^ index)
}
