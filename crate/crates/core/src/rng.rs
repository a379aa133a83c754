//! The seeded generator shared by dataset splitting, weight initialization
//! and mini-batch shuffling.
//!
//! All randomness comes from SplitMix64 (Steele, Lea and Flood, 2014): a
//! 64-bit state advanced by the golden-ratio increment `0x9e3779b97f4a7c15`
//! and finalized with the `0xbf58476d1ce4e5b9` / `0x94d049bb133111eb`
//! multiply-xorshift mix. It is portable and fully determined by its seed,
//! so splits and trained weights are reproducible on every platform.

use rand::SeedableRng;

pub use rand_xoshiro::SplitMix64;

pub fn seeded(seed: u64) -> SplitMix64 {
    SplitMix64::seed_from_u64(seed)
}
