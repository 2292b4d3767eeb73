//! Reproducible per-trial random streams.
//!
//! Every Monte Carlo trial draws from its own PCG-64 generator. The stream
//! (increment) is `(tag, trial)` itself, so distinct trials never share a
//! sequence, and the starting state is a bijective hash of
//! `(seed, tag, trial)`, which decorrelates neighbouring streams. The numbers
//! a trial sees therefore depend only on `(seed, tag, trial)` and never on
//! which worker thread ran it.

use rand_pcg::Pcg64;

/// Generator driving one trial.
pub type TrialRng = Pcg64;

/// Identifies one independent random stream.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct StreamKey {
    pub seed: u64,
    /// Separates unrelated uses of the same seed (sweep cell, check id, ...).
    pub tag: u32,
    pub trial: u64,
}

/// SplitMix64 finaliser: a bijection of `u64` with full avalanche.
#[inline]
fn mix64(mut z: u64) -> u64 {
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

impl StreamKey {
    pub fn new(seed: u64, tag: u32, trial: u64) -> Self {
        Self { seed, tag, trial }
    }

    /// Starting state: each word is a bijection of `trial` for fixed
    /// `(seed, tag)`.
    fn state(&self) -> u128 {
        let base = mix64(self.seed ^ mix64(u64::from(self.tag) ^ 0x6A09_E667_F3BC_C909));
        let hi = mix64(base ^ self.trial);
        let lo = mix64(hi ^ 0x3C6E_F372_FE94_F82B);
        (u128::from(hi) << 64) | u128::from(lo)
    }

    fn stream(&self) -> u128 {
        (u128::from(self.tag) << 64) | u128::from(self.trial)
    }

    pub fn rng(self) -> TrialRng {
        Pcg64::new(self.state(), self.stream())
    }
}
