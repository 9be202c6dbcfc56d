//! Seed derivation shared by samplers and simulations.
//!
//! Every stream is a `ChaCha8Rng` seeded from a 64-bit value. Derived
//! streams (trials, restarts, replicates) use `splitmix64(seed ^ index)`,
//! so they are independent of scheduling and of the worker count.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// One step of the SplitMix64 output function.
pub fn splitmix64(x: u64) -> u64 {
    let mut z = x.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Seed of the `index`-th derived stream.
pub fn derived_seed(seed: u64, index: u64) -> u64 {
    splitmix64(seed ^ index)
}

pub fn stream(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn derived_stream(seed: u64, index: u64) -> ChaCha8Rng {
    stream(derived_seed(seed, index))
}
