//! Reproducible random-number streams.
//!
//! Every stochastic task (a resample, a replicate, a restart) draws from its
//! own generator derived from a base seed and the task's index. Parallel and
//! serial execution therefore consume identical streams, and results do not
//! depend on scheduling order.

use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// SplitMix64 finalizer; a full-period mixer with good avalanche behaviour.
fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// Mixes a base seed with a sequence of stream labels into a derived seed.
pub fn derive_seed(seed: u64, labels: &[u64]) -> u64 {
    let mut state = splitmix64(seed);
    for &label in labels {
        state = splitmix64(state ^ splitmix64(label));
    }
    state
}

/// A generator for the sub-stream identified by `labels` under `seed`.
pub fn rng_for(seed: u64, labels: &[u64]) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(derive_seed(seed, labels))
}
