//! Reproducible random streams.
//!
//! A master seed is expanded into independent sub-streams by hashing a path
//! of indices (purpose tag, trial, cluster, slot, …) with the SplitMix64
//! finalizer. Each stream is a ChaCha8 generator seeded from the derived
//! value, so a trial's draws depend only on `(master, path)` and never on
//! scheduling.
//!
//! Gaussian samples come from `rand_distr::StandardNormal` (ziggurat) in
//! the pinned `rand_distr` 0.5 release.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// Generator used for every simulated random draw.
pub type Stream = ChaCha8Rng;

/// Purpose tags keep streams for different uses disjoint even when the
/// remaining path indices coincide.
pub mod tag {
    pub const READINGS: u64 = 0x5245_4144;
    pub const NOISE: u64 = 0x4e4f_4953;
    pub const GENERATOR: u64 = 0x4745_4e52;
    pub const MOMENT: u64 = 0x4d4f_4d54;
    pub const GOODNESS: u64 = 0x474f_4f44;
    pub const GRID: u64 = 0x4752_4944;
    pub const MESSAGES: u64 = 0x4d53_4753;
}

const GOLDEN_GAMMA: u64 = 0x9e37_79b9_7f4a_7c15;

/// SplitMix64 output function.
pub fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(GOLDEN_GAMMA);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// Folds `path` into `master`, one SplitMix64 round per element.
pub fn derive_seed(master: u64, path: &[u64]) -> u64 {
    path.iter()
        .fold(splitmix64(master), |acc, &x| splitmix64(acc ^ splitmix64(x)))
}

/// Opens the sub-stream addressed by `path`.
pub fn stream(master: u64, path: &[u64]) -> Stream {
    Stream::seed_from_u64(derive_seed(master, path))
}
