//! Seed derivation for per-path random streams.
//!
//! Every Monte Carlo path `i` draws from its own ChaCha8 stream seeded with
//! `path_seed(root, i)`. The Wiener increments of a path therefore depend
//! only on `(root, i)`, never on the scheduling order of a parallel batch,
//! and every control in a dictionary sees the same increments.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

const GOLDEN_GAMMA: u64 = 0x9E37_79B9_7F4A_7C15;

/// SplitMix64 finalizer.
pub fn mix64(mut z: u64) -> u64 {
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// `mix64(root + (index + 1) * GOLDEN_GAMMA)`, i.e. the `index`-th output of a
/// SplitMix64 generator started at `root`.
pub fn path_seed(root: u64, index: u64) -> u64 {
    mix64(root.wrapping_add(index.wrapping_add(1).wrapping_mul(GOLDEN_GAMMA)))
}

pub fn path_rng(root: u64, index: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(path_seed(root, index))
}

/// Derive an independent root seed for a sub-experiment.
pub fn substream(root: u64, tag: u64) -> u64 {
    mix64(root ^ mix64(tag.wrapping_add(0x5851_F42D_4C95_7F2D)))
}
