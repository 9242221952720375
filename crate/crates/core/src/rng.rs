//! Seeded randomness.
//!
//! Every random draw in the crate goes through [`SeededRng`], a ChaCha8 stream
//! keyed by a single `u64`. Gaussian variates come from `rand_distr`'s
//! `StandardNormal`, which is a deterministic transform of the stream, so a
//! seed pins down every generated problem, operator and experiment.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

pub type SeededRng = ChaCha8Rng;

pub fn seeded_rng(seed: u64) -> SeededRng {
    ChaCha8Rng::seed_from_u64(seed)
}

#[inline]
pub fn standard_normal(rng: &mut SeededRng) -> f64 {
    rng.sample(StandardNormal)
}

/// SplitMix64 finalizer.
#[inline]
pub fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Derives a child seed from a base seed and a sequence of indices.
///
/// `derive_seed(b, &[c, t]) = sm(sm(sm(b) ^ c) ^ t)` where `sm` is the
/// SplitMix64 finalizer. Used for per-cell/per-trial seeds in experiment grids
/// and for per-sample seeds in Monte-Carlo probes.
pub fn derive_seed(base: u64, indices: &[u64]) -> u64 {
    indices
        .iter()
        .fold(splitmix64(base), |acc, &ix| splitmix64(acc ^ ix))
}
