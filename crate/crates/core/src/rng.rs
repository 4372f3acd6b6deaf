//! Seeded randomness shared by solvers, verifiers and the harness.
//!
//! Every random decision in the crate is driven by an explicit 64-bit seed
//! fed into a SplitMix64 generator, so any run can be replayed exactly.

use rand::{RngCore, SeedableRng};
pub use rand_xoshiro::SplitMix64;

/// Generator for a single seed.
pub fn seeded(seed: u64) -> SplitMix64 {
    SplitMix64::seed_from_u64(seed)
}

/// A chain of derived seeds, each one the next SplitMix64 output.
#[derive(Debug, Clone)]
pub struct SeedChain {
    inner: SplitMix64,
}

impl SeedChain {
    pub fn new(seed: u64) -> Self {
        SeedChain { inner: seeded(seed) }
    }

    pub fn next_seed(&mut self) -> u64 {
        self.inner.next_u64()
    }
}

impl Iterator for SeedChain {
    type Item = u64;

    fn next(&mut self) -> Option<u64> {
        Some(self.next_seed())
    }
}
