//! Splittable seed derivation.
//!
//! Every random stream in the crate is keyed by a 64-bit value obtained by
//! folding a master seed with a list of coordinates through [`mix`]. The
//! derivation is pure, so a stream depends only on its coordinates and never
//! on the order in which work is scheduled.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// SplitMix64 finalizer.
#[inline]
pub fn splitmix64(x: u64) -> u64 {
    let mut z = x.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Mixes one coordinate into a seed: `splitmix64(seed ^ splitmix64(coord).rotate_left(23))`.
#[inline]
pub fn mix(seed: u64, coord: u64) -> u64 {
    splitmix64(seed ^ splitmix64(coord).rotate_left(23))
}

/// Folds a list of coordinates into `seed`, left to right.
pub fn derive(seed: u64, coords: &[u64]) -> u64 {
    coords.iter().fold(seed, |s, &c| mix(s, c))
}

/// Deterministic generator for a derived stream.
pub fn stream(seed: u64, coords: &[u64]) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(derive(seed, coords))
}

/// Purpose tags keep unrelated streams apart even when coordinates collide.
pub mod tag {
    pub const COEFFICIENT: u64 = 0x636f_6566;
    pub const TRIANGULAR: u64 = 0x7472_6961;
    pub const SHARED: u64 = 0x7368_6172;
    pub const MOMENT: u64 = 0x6d6f_6d65;
    pub const TRIAL: u64 = 0x7472_6c73;
}

/// Per-trial seed used by the experiment harness.
pub fn trial_seed(master: u64, degree: usize, trial: usize) -> u64 {
    derive(master, &[tag::TRIAL, degree as u64, trial as u64])
}
