//! Deterministic seed derivation.
//!
//! Every stochastic component in the toolkit draws from a [`ChaCha8Rng`]
//! seeded through [`derive_seed`], so a run is fully determined by one master
//! seed plus a stream counter. Parallel trajectory collection and parallel
//! sweep cells reseed per unit of work instead of sharing a stream, which
//! makes concurrent execution reproduce serial output exactly.

use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// SplitMix64 finalizer; decorrelates nearby (seed, stream) pairs.
fn splitmix64(mut x: u64) -> u64 {
    x = x.wrapping_add(0x9E37_79B9_7F4A_7C15);
    let mut z = x;
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Derives an independent seed for sub-stream `stream` of `base`.
pub fn derive_seed(base: u64, stream: u64) -> u64 {
    splitmix64(base ^ splitmix64(stream.wrapping_mul(0xA24B_AED4_963E_E407)))
}

/// RNG for sub-stream `stream` of `base`.
pub fn stream_rng(base: u64, stream: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(derive_seed(base, stream))
}
