//! Deterministic seed derivation.
//!
//! Every randomized sub-task (a trial, a round inside a trial) gets its own
//! ChaCha stream seeded from `(master, labels...)` so results are stable under
//! reordering and parallel execution.

use rand_chacha::ChaCha8Rng;
use rand_chacha::rand_core::SeedableRng;

/// splitmix64 finalizer; good avalanche for cheap integer mixing.
fn mix(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9e3779b97f4a7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58476d1ce4e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d049bb133111eb);
    z ^ (z >> 31)
}

/// Derives a child seed from a master seed and a label path.
pub fn derive_seed(master: u64, labels: &[u64]) -> u64 {
    let mut acc = mix(master);
    for &l in labels {
        acc = mix(acc ^ mix(l.wrapping_add(0xd1b54a32d192ed03)));
    }
    acc
}

/// A ChaCha8 stream for the given label path under `master`.
pub fn derive_rng(master: u64, labels: &[u64]) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(derive_seed(master, labels))
}
