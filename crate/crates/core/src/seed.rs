//! Stable per-trial seed derivation.
//!
//! `derive_seed(base, a, b)` chains the SplitMix64 finalizer over the three
//! words. The mapping is part of the reproducibility contract and must not
//! change between versions.

const GOLDEN: u64 = 0x9E37_79B9_7F4A_7C15;

/// SplitMix64 output function.
pub fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(GOLDEN);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Seed for item `(a, b)` under `base`, e.g. `(delta index, trial index)`.
pub fn derive_seed(base: u64, a: u64, b: u64) -> u64 {
    splitmix64(splitmix64(splitmix64(base) ^ a) ^ b.rotate_left(32))
}
