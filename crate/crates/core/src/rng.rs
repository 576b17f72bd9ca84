//! Seeded random streams.
//!
//! Every random draw in the crate comes from ChaCha8 (portable and
//! platform-independent). A run seed plus a stream index selects an
//! independent stream: the 64-bit seed is expanded into the ChaCha key with
//! `seed_from_u64`, and the stream index becomes ChaCha's 64-bit stream id.
//! Trial `t` of an experiment, restart `r` of a c-means fit and so on each
//! get their own stream, so running them on any number of threads yields the
//! same numbers.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub type Rng = ChaCha8Rng;

/// The stream `stream` of the generator keyed by `seed`.
pub fn stream(seed: u64, stream: u64) -> Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}

/// Derives a child seed, for handing a sub-computation (e.g. a re-clustering
/// fit inside trial `index`) its own seed. SplitMix64 finalizer over
/// `seed ^ index`-style mixing.
pub fn derive_seed(seed: u64, domain: u64, index: u64) -> u64 {
    let mut z = seed
        ^ domain.wrapping_mul(0x9E37_79B9_7F4A_7C15)
        ^ index.wrapping_add(1).wrapping_mul(0xD1B5_4A32_D192_ED03);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}
