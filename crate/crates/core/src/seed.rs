//! Seed derivation and the generator type used throughout the crate.
//!
//! All randomness flows through [`Rng`], a ChaCha8 stream whose output is
//! fixed across platforms and `rand` releases, so a seed pins every emitted
//! byte.

use rand::SeedableRng;

pub type Rng = rand_chacha::ChaCha8Rng;

pub fn rng(seed: u64) -> Rng {
    Rng::seed_from_u64(seed)
}

/// Stable sub-seed for item `index` under `master`.
///
/// Two rounds of the SplitMix64 finalizer; adjacent indices give unrelated
/// streams and the mapping never changes between releases.
pub fn sub_seed(master: u64, index: u64) -> u64 {
    let mut z = mix(master ^ 0x9E37_79B9_7F4A_7C15);
    z = z.wrapping_add(index.wrapping_mul(0xBF58_476D_1CE4_E5B9));
    mix(mix(z))
}

fn mix(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}
